#include "fairkit/data/balance.hpp"

#include <algorithm>
#include <random>

#include "fairkit/error.hpp"

namespace fairkit::data {

namespace {

struct Units {
  std::vector<std::vector<Index>> members;  // rows per unit
  std::vector<int> set_of;                  // comparison set per unit
  std::vector<std::string> names;
};

Units build_units(const Dataset& ds, BalanceTarget target) {
  const int C = ds.num_classes;
  const int G = ds.num_groups;
  const CellCounts counts = ds.cell_counts();
  Units u;
  if (target == BalanceTarget::GroupOnly) {
    u.members.resize(G);
    for (Index i = 0; i < ds.size(); ++i) u.members[ds.g[i]].push_back(i);
    for (int g = 0; g < G; ++g) {
      if (u.members[g].empty())
        throw Error(ErrorKind::EmptyCell, "group g=" + std::to_string(g) + " has no instances");
      u.set_of.push_back(0);
      u.names.push_back("g=" + std::to_string(g));
    }
    return u;
  }

  // Cells of classes that occur at all; a class absent from the split has
  // nothing to balance.
  std::vector<int> unit_of(static_cast<std::size_t>(C * G), -1);
  for (int c = 0; c < C; ++c) {
    if (counts.row(c).sum() == 0) continue;
    for (int g = 0; g < G; ++g) {
      if (counts(c, g) == 0)
        throw Error(ErrorKind::EmptyCell, "cell (y=" + std::to_string(c) + ", g=" + std::to_string(g) +
                                              ") has no instances");
      unit_of[c * G + g] = static_cast<int>(u.members.size());
      u.members.emplace_back();
      u.set_of.push_back(target == BalanceTarget::Joint ? 0 : c);
      u.names.push_back("(y=" + std::to_string(c) + ", g=" + std::to_string(g) + ")");
    }
  }
  for (Index i = 0; i < ds.size(); ++i) u.members[unit_of[ds.y[i] * G + ds.g[i]]].push_back(i);
  return u;
}

}  // namespace

std::string to_string(BalanceTarget target) {
  switch (target) {
    case BalanceTarget::GroupOnly: return "g";
    case BalanceTarget::ClassDown: return "y";
    case BalanceTarget::Joint: return "joint";
    case BalanceTarget::EqualOpp: return "EO";
  }
  return "EO";
}

std::string to_string(BalanceMode mode) {
  switch (mode) {
    case BalanceMode::Resampling: return "Resampling";
    case BalanceMode::Reweighting: return "Reweighting";
    case BalanceMode::Downsampling: return "Downsampling";
  }
  return "Resampling";
}

Dataset balance(const Dataset& ds, const BalanceObjective& obj, std::uint64_t seed) {
  ds.validate();
  if (ds.split != Split::Train) throw Error(ErrorKind::Config, "balancing applies to the training split only");
  if (obj.target == BalanceTarget::ClassDown && obj.mode != BalanceMode::Downsampling)
    throw Error(ErrorKind::Config, "objective y (CB) is defined by downsampling; got " + to_string(obj.mode));

  const Units units = build_units(ds, obj.target);
  const int num_sets = *std::max_element(units.set_of.begin(), units.set_of.end()) + 1;
  std::vector<Index> lo(num_sets, std::numeric_limits<Index>::max()), hi(num_sets, 0), total(num_sets, 0),
      members(num_sets, 0);
  for (std::size_t k = 0; k < units.members.size(); ++k) {
    const int s = units.set_of[k];
    const Index count = static_cast<Index>(units.members[k].size());
    lo[s] = std::min(lo[s], count);
    hi[s] = std::max(hi[s], count);
    total[s] += count;
    ++members[s];
  }

  std::mt19937_64 rng(seed);
  switch (obj.mode) {
    case BalanceMode::Downsampling: {
      std::vector<Index> keep;
      for (std::size_t k = 0; k < units.members.size(); ++k) {
        auto rows = units.members[k];
        const auto target = static_cast<std::size_t>(lo[units.set_of[k]]);
        if (rows.size() > target) {
          std::shuffle(rows.begin(), rows.end(), rng);
          rows.resize(target);
        }
        keep.insert(keep.end(), rows.begin(), rows.end());
      }
      std::sort(keep.begin(), keep.end());
      return ds.subset(keep);
    }
    case BalanceMode::Resampling: {
      std::vector<Index> rows(static_cast<std::size_t>(ds.size()));
      for (Index i = 0; i < ds.size(); ++i) rows[i] = i;
      for (std::size_t k = 0; k < units.members.size(); ++k) {
        const auto& unit = units.members[k];
        const Index extra = hi[units.set_of[k]] - static_cast<Index>(unit.size());
        std::uniform_int_distribution<std::size_t> pick(0, unit.size() - 1);
        for (Index e = 0; e < extra; ++e) rows.push_back(unit[pick(rng)]);
      }
      return ds.subset(rows);
    }
    case BalanceMode::Reweighting: {
      Dataset out = ds;
      for (std::size_t k = 0; k < units.members.size(); ++k) {
        const int s = units.set_of[k];
        const double target = static_cast<double>(total[s]) / static_cast<double>(members[s]);
        const double w = target / static_cast<double>(units.members[k].size());
        for (Index i : units.members[k]) out.weights[i] = w;
      }
      out.weights /= out.weights.mean();
      return out;
    }
  }
  return ds;
}

}  // namespace fairkit::data
