#include "fairkit/train/trainer.hpp"

#include <chrono>
#include <cmath>

#include "fairkit/error.hpp"
#include "fairkit/nn/checkpoint.hpp"
#include "fairkit/nn/loss.hpp"

namespace fairkit::train {

namespace {

void add_gate_gradients(const Model& model, const Matrix& h, const Labels& g, const Matrix& d_logits,
                        Matrix& d_hidden, std::vector<nn::Gradients>& head_grads) {
  head_grads.clear();
  for (const auto& head : model.group_heads) head_grads.push_back(nn::Gradients::zeros_like(head));
  for (Index i = 0; i < h.rows(); ++i) {
    const auto k = static_cast<std::size_t>(g[i]);
    if (k >= model.group_heads.size()) throw Error(ErrorKind::LabelDomain, "group has no gate head");
    const nn::Layer& head = model.group_heads[k].layers().front();
    nn::Layer& grad = head_grads[k].layers.front();
    grad.weight.noalias() += d_logits.row(i).transpose() * h.row(i);
    grad.bias += d_logits.row(i).transpose();
    d_hidden.row(i).noalias() += d_logits.row(i) * head.weight;
  }
}

nn::Checkpoint snapshot(std::uint64_t epoch, const Model& model, const std::vector<Discriminator>& discs,
                        const Optimizers& opt) {
  nn::Checkpoint ckpt;
  ckpt.epoch = epoch;
  ckpt.entries.push_back({"main", model.net, opt.main});
  for (std::size_t k = 0; k < model.group_heads.size(); ++k)
    ckpt.entries.push_back({"head_" + std::to_string(k), model.group_heads[k], opt.heads[k]});
  for (std::size_t k = 0; k < discs.size(); ++k)
    ckpt.entries.push_back({"disc_" + std::to_string(k), discs[k].net, opt.discs[k]});
  return ckpt;
}

}  // namespace

StepResult compute_step(const Model& model, const std::vector<Discriminator>& discs, const data::Batch& batch,
                        const MethodConfig& cfg, int num_classes, int num_groups) {
  StepResult out;
  const auto trace = nn::forward(model.net, batch.X);
  const Matrix& h = trace.hidden();
  const Matrix logit = model.has_gate() ? gate_forward(trace.logits(), h, batch.g, model.group_heads)
                                        : trace.logits();
  if (logit.cols() != num_classes) throw Error(ErrorKind::Shape, "model output width differs from num_classes");

  auto ce = nn::cross_entropy(logit, batch.y, batch.weights);
  out.losses.ce = ce.loss;
  out.losses.objective = ce.loss;
  out.per_example_ce = ce.per_example;
  Matrix d_logits = std::move(ce.d_logits);
  Matrix d_hidden = Matrix::Zero(h.rows(), h.cols());

  if (cfg.method == Method::EO_CLA && cfg.eo_cla_lambda > 0.0) {
    const auto adj = eo_cla_adjusted_loss(out.per_example_ce, batch.y, batch.g, cfg.eo_cla_lambda);
    out.losses.eo_cla = adj.addition;
    out.losses.objective += adj.addition;
    Matrix d_ce = nn::softmax(logit);
    for (Index i = 0; i < d_ce.rows(); ++i) d_ce(i, batch.y[i]) -= 1.0;
    d_logits += adj.d_per_example.asDiagonal() * d_ce;
  }

  if (cfg.method == Method::FairSCL && (cfg.fcl_lambda_y > 0.0 || cfg.fcl_lambda_g > 0.0)) {
    const auto scl = fairscl_loss(h, batch.y, batch.g, cfg.fcl_lambda_y, cfg.fcl_lambda_g, cfg.temperature);
    out.losses.fairscl = scl.loss;
    out.losses.objective += scl.loss;
    d_hidden += scl.d_reprs;
  }

  if (model.has_gate()) add_gate_gradients(model, h, batch.g, d_logits, d_hidden, out.heads);

  if (!discs.empty()) {
    const double n_disc = static_cast<double>(discs.size());
    std::vector<nn::ActivationTrace> traces;
    std::vector<Matrix> first_hidden;
    for (const auto& disc : discs) {
      traces.push_back(nn::forward(disc.net, discriminator_input(disc, h, batch.y, num_classes)));
      if (traces.back().logits().cols() != num_groups)
        throw Error(ErrorKind::Shape, "discriminator output width differs from num_groups");
      const auto dce = nn::cross_entropy(traces.back().logits(), batch.g, batch.weights);
      auto grads = nn::backward(disc.net, traces.back(), dce.d_logits);
      out.losses.adversary_ce += dce.loss / n_disc;
      out.losses.disc_objective += dce.loss;
      if (cfg.adv_lambda > 0.0) d_hidden -= (cfg.adv_lambda / n_disc) * grads.input.leftCols(h.cols());
      out.discs.push_back(std::move(grads));
      if (disc.net.num_hidden_layers() > 0) first_hidden.push_back(traces.back().post.front());
    }
    if (cfg.adv_lambda > 0.0) out.losses.objective -= cfg.adv_lambda * out.losses.adversary_ce;

    const double diff = cfg.effective_diff_lambda();
    if (diff > 0.0 && discs.size() > 1) {
      if (first_hidden.size() != discs.size())
        throw Error(ErrorKind::Shape, "orthogonality penalty needs a discriminator hidden layer");
      std::vector<Matrix> pen_grads;
      out.losses.penalty = orthogonality_penalty(first_hidden, &pen_grads);
      out.losses.disc_objective += diff * out.losses.penalty;
      for (std::size_t k = 0; k < discs.size(); ++k) {
        const nn::HiddenGrad extra{0, diff * pen_grads[k]};
        const Matrix zero = Matrix::Zero(traces[k].logits().rows(), traces[k].logits().cols());
        out.discs[k] += nn::backward(discs[k].net, traces[k], zero, std::span(&extra, 1));
      }
    }
  }

  if (model.net.num_hidden_layers() > 0 && !d_hidden.isZero(0.0)) {
    const nn::HiddenGrad extra{model.net.num_hidden_layers() - 1, std::move(d_hidden)};
    out.main = nn::backward(model.net, trace, d_logits, std::span(&extra, 1));
  } else {
    out.main = nn::backward(model.net, trace, d_logits);
  }
  return out;
}

Optimizers Optimizers::for_model(const Model& model, const std::vector<Discriminator>& discs,
                                 const nn::OptimizerConfig& config) {
  Optimizers opt{nn::OptimizerState::for_network(model.net, config), {}, {}};
  for (const auto& head : model.group_heads) opt.heads.push_back(nn::OptimizerState::for_network(head, config));
  for (const auto& disc : discs) opt.discs.push_back(nn::OptimizerState::for_network(disc.net, config));
  return opt;
}

StepResult adv_joint_step(Model& model, std::vector<Discriminator>& discs, Optimizers& opt, const data::Batch& batch,
                          const MethodConfig& cfg, int num_classes, int num_groups) {
  StepResult step = compute_step(model, discs, batch, cfg, num_classes, num_groups);
  nn::optimizer_step(model.net, step.main, opt.main);
  for (std::size_t k = 0; k < model.group_heads.size(); ++k)
    nn::optimizer_step(model.group_heads[k], step.heads[k], opt.heads[k]);
  for (std::size_t k = 0; k < discs.size(); ++k) nn::optimizer_step(discs[k].net, step.discs[k], opt.discs[k]);
  return step;
}

eval::FairnessReport evaluate_model(const Model& model, const data::Dataset& ds) {
  return eval::evaluate(predict(model, ds.X, ds.g), ds.y, ds.g, ds.num_classes, ds.num_groups);
}

RunRecord train(const data::DatasetBundle& bundle, const MethodConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  const data::Dataset& tr = bundle.train;
  tr.validate();
  bundle.dev.validate();
  bundle.test.validate();
  if (tr.size() == 0) throw Error(ErrorKind::EmptyInput, "training split is empty");
  if (bundle.dev.dim() != tr.dim() || bundle.test.dim() != tr.dim())
    throw Error(ErrorKind::Shape, "train/dev/test feature widths differ");
  const int C = std::max({tr.num_classes, bundle.dev.num_classes, bundle.test.num_classes});
  const int G = std::max({tr.num_groups, bundle.dev.num_groups, bundle.test.num_groups});
  data::Dataset dev = bundle.dev, test = bundle.test;
  dev.num_classes = test.num_classes = C;
  dev.num_groups = test.num_groups = G;

  RunRecord run{cfg, {}, make_model(cfg, tr.dim(), C, G), {}};
  auto discs = make_discriminators(cfg, run.model.net.hidden_dim(), C, G);
  Optimizers opt = Optimizers::for_model(run.model, discs, cfg.optimizer);

  std::optional<FairBatchState> fairbatch;
  if (cfg.method == Method::FairBatch) {
    data::Dataset padded = tr;
    padded.num_classes = C;
    padded.num_groups = G;
    fairbatch = FairBatchState::initial(padded, cfg.fairbatch_alpha);
  }
  if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);

  const std::uint64_t shuffle_base = mix_seed(cfg.seed, streams::kShuffle);
  const Index batch_size = std::min<Index>(cfg.batch_size, tr.size());

  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    if (epoch > 0) {
      data::BatchPlan plan{batch_size, mix_seed(shuffle_base, static_cast<std::uint64_t>(epoch)), std::nullopt};
      if (fairbatch) plan.group_sampling_probs = fairbatch->probs;
      const auto batches = data::make_batches(tr, plan);
      data::CellProbs cell_loss = data::CellProbs::Zero(C, G);
      data::CellCounts cell_n = data::CellCounts::Zero(C, G);
      double total = 0.0;
      for (std::size_t b = 0; b < batches.size(); ++b) {
        const auto& batch = batches[b];
        StepResult step = compute_step(run.model, discs, batch, cfg, C, G);
        if (!std::isfinite(step.losses.objective) || !std::isfinite(step.losses.disc_objective))
          throw Error(ErrorKind::TrainingDiverged,
                      "non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(b));
        try {
          nn::optimizer_step(run.model.net, step.main, opt.main);
          for (std::size_t k = 0; k < run.model.group_heads.size(); ++k)
            nn::optimizer_step(run.model.group_heads[k], step.heads[k], opt.heads[k]);
          for (std::size_t k = 0; k < discs.size(); ++k)
            nn::optimizer_step(discs[k].net, step.discs[k], opt.discs[k]);
        } catch (const Error& e) {
          throw Error(e.kind(), "epoch " + std::to_string(epoch) + " batch " + std::to_string(b) + ": " + e.detail());
        }
        total += step.losses.objective;
        if (fairbatch)
          for (Index i = 0; i < batch.size(); ++i) {
            cell_loss(batch.y[i], batch.g[i]) += step.per_example_ce[i];
            ++cell_n(batch.y[i], batch.g[i]);
          }
      }
      rec.train_loss = total / static_cast<double>(batches.size());
      if (fairbatch) {
        const data::CellProbs mean = cell_loss.array() / cell_n.cast<double>().array().max(1.0);
        *fairbatch = fairbatch_epoch_update(*fairbatch, mean, cell_n);
      }
    }

    const auto dev_report = evaluate_model(run.model, dev);
    const auto test_report = evaluate_model(run.model, test);
    rec.dev_performance = dev_report.performance;
    rec.dev_fairness = dev_report.fairness;
    rec.test_performance = test_report.performance;
    rec.test_fairness = test_report.fairness;
    if (options.checkpoint_dir) {
      const std::string name = "epoch_" + std::to_string(epoch);
      nn::save_checkpoint(snapshot(static_cast<std::uint64_t>(epoch), run.model, discs, opt),
                          *options.checkpoint_dir / name);
      rec.checkpoint = (std::filesystem::path("checkpoints") / name).generic_string();
    }
    if (options.keep_trajectory) run.trajectory.push_back(run.model.net.flatten());
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (options.on_epoch) options.on_epoch(rec);
    run.epochs.push_back(rec);
  }
  return run;
}

}  // namespace fairkit::train
