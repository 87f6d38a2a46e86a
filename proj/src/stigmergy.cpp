#include "cdrstig/stigmergy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cdrstig/error.hpp"
#include "cdrstig/text.hpp"

namespace cdrstig::stig {

void MarkSpec::validate() const {
  if (!(top_radius_m > 0.0) || !(base_radius_m > top_radius_m))
    throw Error(ErrorCode::ConfigInvalid, "mark radii must satisfy 0 < top < base");
  if (!(peak > 0.0)) throw Error(ErrorCode::ConfigInvalid, "mark peak must be positive");
}

double mark_intensity(double distance_m, const MarkSpec& mark) noexcept {
  if (distance_m <= mark.top_radius_m) return mark.peak;
  if (distance_m >= mark.base_radius_m) return 0.0;
  return mark.peak * (mark.base_radius_m - distance_m) / (mark.base_radius_m - mark.top_radius_m);
}

void EvaporationPolicy::validate() const {
  if (!(delta >= 0.0) || !(delta < 1.0))
    throw Error(ErrorCode::ConfigInvalid, "evaporation rate must lie in [0, 1)");
}

void EngineConfig::validate() const {
  mark.validate();
  policy.validate();
  if (!(cell_size_m > 0.0)) throw Error(ErrorCode::ConfigInvalid, "cell size must be positive");
  if (step_seconds <= 0) throw Error(ErrorCode::ConfigInvalid, "step length must be positive");
}

Footprint::Footprint(const MarkSpec& mark, double cell_size_m) {
  mark.validate();
  reach_ = static_cast<std::int32_t>(std::ceil(mark.base_radius_m / cell_size_m));
  for (std::int32_t dr = -reach_; dr <= reach_; ++dr)
    for (std::int32_t dc = -reach_; dc <= reach_; ++dc) {
      const double d = cell_size_m * std::hypot(static_cast<double>(dr), static_cast<double>(dc));
      const double v = mark_intensity(d, mark);
      if (v > 0.0) offsets_.push_back(Offset{dr, dc, v});
    }
}

std::vector<CellIntensity> mark_footprint(geo::Cell center, const MarkSpec& mark,
                                          const geo::GridSpec& spec) {
  const Footprint fp(mark, spec.cell_size_m);
  std::vector<CellIntensity> out;
  for (const auto& o : fp.offsets()) {
    const geo::Cell c{center.row + o.dr, center.col + o.dc};
    if (spec.contains(c)) out.push_back(CellIntensity{c, o.intensity});
  }
  return out;
}

Trail::Trail(const geo::GridSpec& spec, std::int64_t clock)
    : spec_(spec), values_(spec.cell_count(), 0.0), clock_(clock) {}

void Trail::deposit(geo::Cell center, const Footprint& footprint, double weight) {
  const std::int32_t reach = footprint.reach();
  const std::int32_t r0 = std::max(center.row - reach, 0);
  const std::int32_t r1 = std::min(center.row + reach + 1, spec_.n_rows);
  const std::int32_t c0 = std::max(center.col - reach, 0);
  const std::int32_t c1 = std::min(center.col + reach + 1, spec_.n_cols);
  if (r0 >= r1 || c0 >= c1) return;

  const bool interior = r0 == center.row - reach && r1 == center.row + reach + 1 &&
                        c0 == center.col - reach && c1 == center.col + reach + 1;
  const auto n_cols = static_cast<std::ptrdiff_t>(spec_.n_cols);
  double* base = values_.data() + static_cast<std::ptrdiff_t>(center.row) * n_cols + center.col;
  if (interior) {
    for (const auto& o : footprint.offsets())
      base[o.dr * n_cols + o.dc] += weight * o.intensity;
  } else {
    for (const auto& o : footprint.offsets()) {
      const std::int32_t r = center.row + o.dr;
      const std::int32_t c = center.col + o.dc;
      if (r < 0 || c < 0 || r >= spec_.n_rows || c >= spec_.n_cols) continue;
      base[o.dr * n_cols + o.dc] += weight * o.intensity;
    }
  }

  if (active_.empty()) {
    active_ = Box{r0, r1, c0, c1};
  } else {
    active_.r0 = std::min(active_.r0, r0);
    active_.r1 = std::max(active_.r1, r1);
    active_.c0 = std::min(active_.c0, c0);
    active_.c1 = std::max(active_.c1, c1);
  }
}

void Trail::evaporate(const EvaporationPolicy& policy) {
  for (std::int32_t r = active_.r0; r < active_.r1; ++r) {
    double* row = values_.data() + spec_.offset(geo::Cell{r, 0});
    if (policy.mode == EvaporationMode::Multiplicative) {
      const double keep = 1.0 - policy.delta;
      for (std::int32_t c = active_.c0; c < active_.c1; ++c) row[c] *= keep;
    } else {
      for (std::int32_t c = active_.c0; c < active_.c1; ++c) row[c] = policy.apply(row[c]);
    }
  }
}

void Trail::scale(double k) {
  if (!(k >= 0.0)) throw Error(ErrorCode::InvariantViolation, "trail scale must be >= 0");
  for (auto& v : values_) v *= k;
}

Trail step(Trail trail, std::span<const SampleEvent> deposits, const EvaporationPolicy& policy,
           const MarkSpec& mark) {
  const std::int64_t next = trail.clock() + 1;
  for (const auto& s : deposits)
    if (s.step != next)
      throw Error(ErrorCode::StepMismatch, "deposit at step " + std::to_string(s.step) +
                                               ", trail expects " + std::to_string(next));
  trail.evaporate(policy);
  if (!deposits.empty()) {
    const Footprint fp(mark, trail.spec().cell_size_m);
    for (const auto& s : deposits) trail.deposit(geo::cell_of(s.point, trail.spec()), fp);
  }
  trail.set_clock(next);
  return trail;
}

Trail build_trail(std::span<const CellSample> samples, StepWindow window,
                  const EvaporationPolicy& policy, const Footprint& footprint,
                  const geo::GridSpec& spec) {
  if (window.last < window.first)
    throw Error(ErrorCode::StepMismatch, "empty step window");
  for (const auto& s : samples)
    if (s.step < window.first || s.step > window.last)
      throw Error(ErrorCode::StepMismatch,
                  "sample at step " + std::to_string(s.step) + " outside window [" +
                      std::to_string(window.first) + ", " + std::to_string(window.last) + "]");

  Trail trail(spec, window.last);
  if (policy.mode == EvaporationMode::Multiplicative) {
    // Linear decay: a mark deposited k steps before the window end has been
    // evaporated k times, so it enters with weight (1 - delta)^k.
    std::vector<double> decay(static_cast<std::size_t>(window.length()), 1.0);
    for (std::size_t k = 1; k < decay.size(); ++k) decay[k] = decay[k - 1] * (1.0 - policy.delta);
    for (const auto& s : samples)
      trail.deposit(s.cell, footprint, decay[static_cast<std::size_t>(window.last - s.step)]);
    return trail;
  }

  // Clamped decay is not linear; fold the recurrence step by step.
  std::vector<CellSample> sorted(samples.begin(), samples.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const CellSample& a, const CellSample& b) { return a.step < b.step; });
  auto it = sorted.begin();
  for (std::int64_t t = window.first; t <= window.last; ++t) {
    trail.evaporate(policy);
    for (; it != sorted.end() && it->step == t; ++it) trail.deposit(it->cell, footprint);
  }
  return trail;
}

Trail build_trail(std::span<const SampleEvent> samples, StepWindow window,
                  const EvaporationPolicy& policy, const MarkSpec& mark,
                  const geo::GridSpec& spec) {
  std::vector<CellSample> cells;
  cells.reserve(samples.size());
  for (const auto& s : samples) cells.push_back(CellSample{geo::cell_of(s.point, spec), s.step});
  return build_trail(cells, window, policy, Footprint(mark, spec.cell_size_m), spec);
}

double trail_similarity(const Trail& a, const Trail& b) {
  if (!(a.spec() == b.spec())) throw Error(ErrorCode::GridMismatch, "trails use different rasters");
  const auto ba = a.active();
  const auto bb = b.active();
  Trail::Box box;
  if (ba.empty()) box = bb;
  else if (bb.empty()) box = ba;
  else box = Trail::Box{std::min(ba.r0, bb.r0), std::max(ba.r1, bb.r1), std::min(ba.c0, bb.c0),
                        std::max(ba.c1, bb.c1)};

  double inter = 0.0, uni = 0.0;
  const auto va = a.values();
  const auto vb = b.values();
  for (std::int32_t r = box.r0; r < box.r1; ++r) {
    const std::size_t row = a.spec().offset(geo::Cell{r, 0});
    for (std::int32_t c = box.c0; c < box.c1; ++c) {
      const double x = va[row + static_cast<std::size_t>(c)];
      const double y = vb[row + static_cast<std::size_t>(c)];
      inter += std::min(x, y);
      uni += std::max(x, y);
    }
  }
  if (!(uni > 0.0)) throw Error(ErrorCode::BothTrailsEmpty, "both trails are empty");
  return inter / uni;
}

double trail_volume(const Trail& t) noexcept {
  const auto box = t.active();
  double sum = 0.0;
  const auto v = t.values();
  for (std::int32_t r = box.r0; r < box.r1; ++r) {
    const std::size_t row = t.spec().offset(geo::Cell{r, 0});
    for (std::int32_t c = box.c0; c < box.c1; ++c) sum += v[row + static_cast<std::size_t>(c)];
  }
  return sum;
}

void write_trail(const std::string& stem, const Trail& trail) {
  geo::write_grid(stem, trail.spec(), trail.values(),
                  {{"clock", std::to_string(trail.clock())}});
}

}  // namespace cdrstig::stig
