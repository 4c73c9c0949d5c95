#include "fairkit/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "fairkit/error.hpp"

namespace fairkit::nn {

namespace {

constexpr std::array<char, 8> kMagic{'F', 'A', 'I', 'R', 'K', 'C', 'K', 'P'};

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian host");

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  template <typename T>
  void pod(T value) {
    os_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void string(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void reals(const Vector& v) {
    pod<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
    os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  template <typename T>
  T pod() {
    T value{};
    is_.read(reinterpret_cast<char*>(&value), sizeof(T));
    check();
    return value;
  }
  std::string string() {
    const auto n = pod<std::uint32_t>();
    std::string s(n, '\0');
    is_.read(s.data(), n);
    check();
    return s;
  }
  Vector reals() {
    const auto n = pod<std::uint64_t>();
    if (n > (1ULL << 34)) throw Error(ErrorKind::Parse, source_ + ": implausible parameter count");
    Vector v(static_cast<Index>(n));
    is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    check();
    return v;
  }

 private:
  void check() {
    if (!is_) throw Error(ErrorKind::Parse, source_ + ": truncated checkpoint");
  }
  std::istream& is_;
  std::string source_;
};

Vector flatten(const std::vector<Layer>& layers, const MlpSpec& spec) {
  return Network(spec, layers).flatten();
}

std::vector<Layer> unflatten(const Vector& params, const MlpSpec& spec) {
  Network net = Network::zeros(spec);
  net.unflatten(params);
  return net.layers();
}

}  // namespace

const CheckpointEntry& Checkpoint::at(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw Error(ErrorKind::Io, "checkpoint has no entry '" + name + "'");
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot write checkpoint " + path.string());
  Writer w(os);
  os.write(kMagic.data(), kMagic.size());
  w.pod<std::uint32_t>(Checkpoint::kVersion);
  w.pod<std::uint64_t>(ckpt.epoch);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& entry : ckpt.entries) {
    const auto& spec = entry.network.spec();
    w.string(entry.name);
    w.pod<std::int64_t>(spec.input_dim);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(spec.hidden_dims.size()));
    for (Index h : spec.hidden_dims) w.pod<std::int64_t>(h);
    w.pod<std::int64_t>(spec.output_dim);
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(spec.activation));
    w.pod<std::uint64_t>(spec.seed);
    w.reals(entry.network.flatten());
    w.pod<std::uint8_t>(entry.optimizer ? 1 : 0);
    if (entry.optimizer) {
      const auto& st = *entry.optimizer;
      w.pod<std::uint8_t>(static_cast<std::uint8_t>(st.config.kind));
      w.pod<double>(st.config.lr);
      w.pod<double>(st.config.beta1);
      w.pod<double>(st.config.beta2);
      w.pod<double>(st.config.eps);
      w.pod<std::uint64_t>(st.step);
      if (st.config.kind == OptimizerKind::Adam) {
        w.reals(flatten(st.first_moment, spec));
        w.reals(flatten(st.second_moment, spec));
      }
    }
  }
  if (!os) throw Error(ErrorKind::Io, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open checkpoint " + path.string());
  Reader r(is, path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw Error(ErrorKind::Parse, path.string() + ": not a fairkit checkpoint");
  const auto version = r.pod<std::uint32_t>();
  if (version != Checkpoint::kVersion)
    throw Error(ErrorKind::Parse, path.string() + ": unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.epoch = r.pod<std::uint64_t>();
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::string name = r.string();
    MlpSpec spec;
    spec.input_dim = r.pod<std::int64_t>();
    const auto n_hidden = r.pod<std::uint32_t>();
    for (std::uint32_t k = 0; k < n_hidden; ++k) spec.hidden_dims.push_back(r.pod<std::int64_t>());
    spec.output_dim = r.pod<std::int64_t>();
    const auto act = r.pod<std::uint8_t>();
    if (act > static_cast<std::uint8_t>(Activation::Tanh))
      throw Error(ErrorKind::Parse, path.string() + ": unknown activation");
    spec.activation = static_cast<Activation>(act);
    spec.seed = r.pod<std::uint64_t>();
    Network net = Network::zeros(spec);
    net.unflatten(r.reals());
    std::optional<OptimizerState> opt;
    if (r.pod<std::uint8_t>() != 0) {
      OptimizerState st;
      const auto kind = r.pod<std::uint8_t>();
      if (kind > static_cast<std::uint8_t>(OptimizerKind::Adam))
        throw Error(ErrorKind::Parse, path.string() + ": unknown optimizer kind");
      st.config.kind = static_cast<OptimizerKind>(kind);
      st.config.lr = r.pod<double>();
      st.config.beta1 = r.pod<double>();
      st.config.beta2 = r.pod<double>();
      st.config.eps = r.pod<double>();
      st.step = r.pod<std::uint64_t>();
      if (st.config.kind == OptimizerKind::Adam) {
        st.first_moment = unflatten(r.reals(), spec);
        st.second_moment = unflatten(r.reals(), spec);
      }
      opt = std::move(st);
    }
    ckpt.entries.push_back({name, std::move(net), std::move(opt)});
  }
  return ckpt;
}

}  // namespace fairkit::nn
