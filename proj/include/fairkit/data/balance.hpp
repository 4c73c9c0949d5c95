#pragma once

#include <cstdint>
#include <string>

#include "fairkit/data/dataset.hpp"

namespace fairkit::data {

/// Which counts are equalised.
///   GroupOnly  (BD):   group marginals.
///   ClassDown  (CB):   groups within each class, by downsampling only.
///   Joint      (JB):   every (class, group) cell.
///   EqualOpp   (BTEO): groups within each class; class marginals preserved.
enum class BalanceTarget { GroupOnly, ClassDown, Joint, EqualOpp };
enum class BalanceMode { Resampling, Reweighting, Downsampling };

struct BalanceObjective {
  BalanceTarget target = BalanceTarget::EqualOpp;
  BalanceMode mode = BalanceMode::Resampling;
};

std::string to_string(BalanceTarget target);
std::string to_string(BalanceMode mode);

/// Returns a rebalanced copy of a training split.
///
/// Downsampling keeps, per balanced unit, a seeded uniform subset of size
/// equal to the smallest unit; kept rows stay in their original order.
/// Resampling keeps every row and appends seeded draws with replacement until
/// each unit reaches the largest unit. Reweighting leaves rows untouched and
/// sets w_i = target(unit_i) / count(unit_i), target being the mean unit size
/// of the comparison set, then rescales to mean one.
///
/// Throws EmptyCell when a unit the objective needs is empty, and Config for
/// ClassDown with a mode other than Downsampling.
Dataset balance(const Dataset& ds, const BalanceObjective& obj, std::uint64_t seed);

}  // namespace fairkit::data
