#include "homscope/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "homscope/error.hpp"

namespace homscope {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Natural delay scale of the model: the fringe half-period, or the dip half-width.
double delay_scale(const InterferenceParams& p) {
  if (p.degenerate || p.detuning_hz == 0.0) return 0.5 * p.temporal_width_s;
  return std::min(fringe_half_period_delay(p.detuning_hz), 0.5 * p.temporal_width_s);
}

double fd_derivative(double t, const InterferenceParams& p) {
  const double h = 1e-6 * delay_scale(p);
  return (p11_unchecked(t + h, p) - p11_unchecked(t - h, p)) / (2.0 * h);
}

}  // namespace

FisherValue fisher_information(double t, const InterferenceParams& params, DerivativeMode mode) {
  params.validate();
  const double p = p11_unchecked(t, params);
  const double dp = mode == DerivativeMode::analytic ? p11_derivative(t, params)
                                                     : fd_derivative(t, params);
  const OutcomeProbabilities probs = outcome_probabilities_from_p11(p);
  const double slopes[3] = {dp, -0.5 * dp, -0.5 * dp};
  const double values[3] = {probs.p11, probs.p20, probs.p02};
  FisherValue out;
  for (int i = 0; i < 3; ++i) {
    if (slopes[i] == 0.0) continue;
    if (values[i] <= 0.0) {
      out.unbounded = true;
      out.value = kInf;
      return out;
    }
    out.value += slopes[i] * slopes[i] / values[i];
  }
  return out;
}

double DepthMapping::depth_per_delay() const {
  return thickness_from_delay(1.0, refractive_index, medium_index, convention);
}

double DepthMapping::depth_from_delay(double delay_s) const {
  return (delay_s - reference_delay_s) * depth_per_delay();
}

double DepthMapping::delay_from_depth(double depth_m) const {
  return reference_delay_s + depth_m / depth_per_delay();
}

FisherReport crb_from_total_information(double total, double n_pairs, const DepthMapping& mapping) {
  require(n_pairs >= 1.0, "CRB needs at least one detected pair");
  require(!(total < 0.0), "Fisher information cannot be negative");
  FisherReport r;
  r.n_pairs = n_pairs;
  r.total_information = total;
  r.fisher_per_pair = total / n_pairs;
  if (std::isinf(total)) {
    r.status = InformationStatus::degenerate;
    r.crb_sigma_t = 0.0;
  } else if (total == 0.0) {
    r.status = InformationStatus::uninformative;
    r.crb_sigma_t = kInf;
  } else {
    r.crb_sigma_t = 1.0 / std::sqrt(total);
  }
  r.crb_sigma_d = r.crb_sigma_t * mapping.depth_per_delay();
  return r;
}

FisherReport crb_report(double t, const InterferenceParams& params, double n_pairs,
                        const DepthMapping& mapping) {
  const FisherValue f = fisher_information(t, params);
  return crb_from_total_information(f.unbounded ? kInf : f.value * n_pairs, n_pairs, mapping);
}

namespace {

// Delay where P11 turns over near cos-argument k pi. The envelope pulls the
// turning point off k pi, towards zero delay.
double fringe_extremum(int k, const InterferenceParams& p) {
  const double w = 2.0 * kPi * p.detuning_hz;
  const double edge = 0.5 * p.temporal_width_s;
  double a = ((k - 0.5) * kPi - p.phase_rad) / w;
  double b = ((k + 0.5) * kPi - p.phase_rad) / w;
  if (a > b) std::swap(a, b);
  const double nominal = (k * kPi - p.phase_rad) / w;
  if (b <= -edge || a >= edge) return nominal;
  const double inner = edge * (1.0 - 1e-12);
  a = std::max(a, -inner);
  b = std::min(b, inner);
  const double da = p11_derivative(a, p), db = p11_derivative(b, p);
  if (da == 0.0 || db == 0.0 || (da > 0.0) == (db > 0.0)) return std::clamp(nominal, -edge, edge);
  for (int i = 0; i < 200 && b - a > 1e-9 * (std::abs(a) + std::abs(b) + 1e-18); ++i) {
    const double m = 0.5 * (a + b);
    ((p11_derivative(m, p) > 0.0) == (da > 0.0) ? a : b) = m;
  }
  return 0.5 * (a + b);
}

}  // namespace

int fringe_branch(double t, const InterferenceParams& p) {
  if (p.degenerate || p.detuning_hz == 0.0) return t >= 0.0 ? 0 : -1;
  const double arg = 2.0 * kPi * p.detuning_hz * t + p.phase_rad;
  int k = static_cast<int>(std::floor(arg / kPi));
  const auto [lo, hi] = branch_window(k, p);
  if (t < lo) k += p.detuning_hz > 0.0 ? -1 : 1;
  else if (t >= hi) k += p.detuning_hz > 0.0 ? 1 : -1;
  return k;
}

std::pair<double, double> branch_window(int k, const InterferenceParams& p) {
  p.validate();
  if (p.degenerate || p.detuning_hz == 0.0) {
    const double half = 0.5 * p.temporal_width_s;
    return k >= 0 ? std::pair{0.0, half} : std::pair{-half, 0.0};
  }
  const double x = fringe_extremum(k, p), y = fringe_extremum(k + 1, p);
  return {std::min(x, y), std::max(x, y)};
}

double nearest_quadrature_delay(const InterferenceParams& p) {
  p.validate();
  if (p.degenerate || p.detuning_hz == 0.0) return 0.25 * p.temporal_width_s;
  const double k = std::floor((p.phase_rad - 0.5 * kPi) / kPi + 0.5);
  return (0.5 * kPi + k * kPi - p.phase_rad) / (2.0 * kPi * p.detuning_hz);
}

double log_likelihood(double t, const OutcomeCounts& n, const InterferenceParams& p) {
  const OutcomeProbabilities probs = outcome_probabilities_from_p11(p11_unchecked(t, p));
  double ll = 0.0;
  const double counts[3] = {n.n11, n.n20, n.n02};
  const double values[3] = {probs.p11, probs.p20, probs.p02};
  for (int i = 0; i < 3; ++i) {
    if (counts[i] == 0.0) continue;
    if (values[i] <= 0.0) return -kInf;
    ll += counts[i] * std::log(values[i]);
  }
  return ll;
}

namespace {

double golden_section_max(double lo, double hi, double tol, const OutcomeCounts& n,
                          const InterferenceParams& p) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = log_likelihood(c, n, p);
  double fd = log_likelihood(d, n, p);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = log_likelihood(c, n, p);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = log_likelihood(d, n, p);
    }
  }
  const double mid = 0.5 * (a + b);
  // The bracket ends may beat the interior at a window edge.
  double best = mid, fbest = log_likelihood(mid, n, p);
  for (double x : {lo, hi}) {
    const double fx = log_likelihood(x, n, p);
    if (fx > fbest) {
      best = x;
      fbest = fx;
    }
  }
  return best;
}

}  // namespace

PixelEstimate mle_delay(const OutcomeCounts& counts, const InterferenceParams& params,
                        const MleOptions& options) {
  params.validate();
  double lo = options.window_lo_s, hi = options.window_hi_s;
  require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "search window must be non-empty");
  require(counts.n11 >= 0.0 && counts.n20 >= 0.0 && counts.n02 >= 0.0, "counts must be non-negative");
  if (!(counts.total() > 0.0)) fail(ErrorKind::non_identifiable, "no coincidences recorded");
  if (params.visibility == 0.0)
    fail(ErrorKind::non_identifiable, "zero visibility: likelihood is flat in the delay");
  const int populated = (counts.n11 > 0.0) + (counts.n20 > 0.0) + (counts.n02 > 0.0);
  if (populated < 2) fail(ErrorKind::non_identifiable, "all counts fall in a single outcome");

  if (options.fringe_hint) {
    const auto [blo, bhi] = branch_window(*options.fringe_hint, params);
    lo = std::max(lo, blo);
    hi = std::min(hi, bhi);
    require(lo < hi, "fringe hint does not intersect the search window");
  }

  const double scale = delay_scale(params);
  double step = options.grid_step_s.value_or(scale / 400.0);
  require(step > 0.0, "grid step must be positive");
  constexpr double kMaxPoints = 2e6;
  step = std::max(step, (hi - lo) / kMaxPoints);
  const auto intervals = static_cast<std::size_t>(std::ceil((hi - lo) / step));
  const std::size_t npts = std::max<std::size_t>(intervals, 2) + 1;
  const double dx = (hi - lo) / static_cast<double>(npts - 1);

  std::vector<double> grid(npts), ll(npts);
  double best = -kInf, worst = kInf;
  std::size_t ibest = 0;
  for (std::size_t i = 0; i < npts; ++i) {
    grid[i] = i + 1 == npts ? hi : lo + dx * static_cast<double>(i);
    ll[i] = log_likelihood(grid[i], counts, params);
    if (ll[i] > best) {
      best = ll[i];
      ibest = i;
    }
    if (std::isfinite(ll[i])) worst = std::min(worst, ll[i]);
  }
  if (!std::isfinite(best))
    fail(ErrorKind::non_identifiable, "data are impossible everywhere in the search window");
  if (best - worst <= 1e-12 * std::max(1.0, std::abs(best)))
    fail(ErrorKind::non_identifiable, "likelihood is flat across the search window");

  // Local maxima (plateaus collapsed to their first point) within the margin.
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < npts; ++i) {
    if (ll[i] < best - options.ambiguity_margin) continue;
    const bool left_ok = i == 0 || ll[i] > ll[i - 1];
    std::size_t j = i;
    while (j + 1 < npts && ll[j + 1] == ll[i]) ++j;
    const bool right_ok = j + 1 == npts || ll[i] > ll[j + 1];
    if (left_ok && right_ok) candidates.push_back(i);
    i = j;
  }
  std::size_t chosen = ibest;
  if (candidates.size() > 1) {
    if (options.prior_delay_s) {
      const double prior = *options.prior_delay_s;
      chosen = *std::min_element(candidates.begin(), candidates.end(),
                                 [&](std::size_t a, std::size_t b) {
                                   return std::abs(grid[a] - prior) < std::abs(grid[b] - prior);
                                 });
    } else if (!options.fringe_hint) {
      std::vector<double> where;
      for (std::size_t c : candidates) where.push_back(grid[c]);
      std::string msg = "ambiguous delay: " + std::to_string(where.size()) +
                        " comparable optima in the search window";
      throw AmbiguityError(msg, std::move(where));
    }
  }

  const double a = grid[chosen == 0 ? 0 : chosen - 1];
  const double b = grid[chosen + 1 == npts ? chosen : chosen + 1];
  const double t_hat = golden_section_max(a, b, 1e-9 * scale, counts, params);

  PixelEstimate est;
  est.delay_s = t_hat;
  est.log_likelihood = log_likelihood(t_hat, counts, params);
  est.n_pairs_used = counts.total();
  est.fringe_index = fringe_branch(t_hat, params);
  est.depth_m = options.mapping.depth_from_delay(t_hat);

  const double h = 1e-4 * scale;
  const double curvature = -(log_likelihood(t_hat + h, counts, params) - 2.0 * est.log_likelihood +
                             log_likelihood(t_hat - h, counts, params)) /
                           (h * h);
  if (std::isfinite(curvature) && curvature > 0.0) {
    est.sigma_s = 1.0 / std::sqrt(curvature);
  } else {
    const FisherValue f = fisher_information(t_hat, params);
    est.sigma_s = (!f.unbounded && f.value > 0.0) ? 1.0 / std::sqrt(counts.total() * f.value) : h;
  }
  return est;
}

PixelEstimate mle_delay(const CoincidenceTally& tally, const InterferenceParams& params,
                        const MleOptions& options) {
  if (!tally.calibrated) return mle_delay(tally.raw_counts(), params, options);
  const OutcomeCounts cal = tally.calibrated_counts();
  const double detected = static_cast<double>(tally.raw_total());
  if (!(detected > 0.0) || !(cal.total() > 0.0))
    fail(ErrorKind::non_identifiable, "no coincidences recorded");
  const double k = detected / cal.total();
  return mle_delay(OutcomeCounts{cal.n11 * k, cal.n20 * k, cal.n02 * k}, params, options);
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) fail(ErrorKind::insufficient_data, "variance needs at least two values");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

double two_step_precision(std::span<const double> s1, std::span<const double> s2) {
  if (s1.size() < 2 || s2.size() < 2)
    fail(ErrorKind::insufficient_data, "two-step precision needs at least two pixels per step");
  return std::sqrt(sample_variance(s1) + sample_variance(s2));
}

double two_step_precision(std::span<const PixelEstimate> s1, std::span<const PixelEstimate> s2) {
  std::vector<double> d1, d2;
  d1.reserve(s1.size());
  d2.reserve(s2.size());
  for (const auto& e : s1) d1.push_back(e.depth_m);
  for (const auto& e : s2) d2.push_back(e.depth_m);
  return two_step_precision(std::span<const double>(d1), std::span<const double>(d2));
}

BlockPrecision block_precision(std::span<const double> values, std::size_t block_size) {
  require(block_size >= 2, "block size must be at least 2");
  const std::size_t blocks = values.size() / block_size;
  if (blocks < 2) fail(ErrorKind::insufficient_data, "block precision needs at least two blocks");
  if (values.size() % block_size != 0)
    fail(ErrorKind::insufficient_data, "value count is not a multiple of the block size");
  std::vector<double> sds(blocks);
  for (std::size_t b = 0; b < blocks; ++b)
    sds[b] = std::sqrt(sample_variance(values.subspan(b * block_size, block_size)));
  BlockPrecision out;
  out.blocks = blocks;
  for (double s : sds) out.mean += s;
  out.mean /= static_cast<double>(blocks);
  out.error_bar = std::sqrt(sample_variance(sds));
  return out;
}

std::vector<double> default_detuning_ladder() {
  std::vector<double> ladder;
  for (int k = 1; k <= 300; ++k) ladder.push_back(k * 0.1e12);
  ladder.push_back(30.1e12);
  return ladder;
}

ScanPlan plan_coarse_to_fine(const PlanRequest& req) {
  req.params.validate();
  require(req.target_sigma_m > 0.0, "target sigma must be positive");
  require(req.prior_hi_m >= req.prior_lo_m, "prior depth range is reversed");
  require(req.max_pairs_per_pass >= 1.0, "pair budget must be at least one pair");
  require(req.min_pairs_per_pass >= 1.0 && req.min_pairs_per_pass <= req.max_pairs_per_pass,
          "minimum pairs per pass must lie between 1 and the pair budget");
  require(req.detected_pair_rate_hz > 0.0, "detected pair rate must be positive");

  std::vector<double> ladder =
      req.available_detunings_hz.empty() ? default_detuning_ladder() : req.available_detunings_hz;
  for (double d : ladder) require(d > 0.0, "available detunings must be positive");
  std::sort(ladder.begin(), ladder.end());
  ladder.erase(std::unique(ladder.begin(), ladder.end()), ladder.end());

  const double scale = req.mapping.depth_per_delay();
  const double target_t = req.target_sigma_m / scale;
  const double range = req.prior_hi_m - req.prior_lo_m;

  const auto at = [&](double detuning) {
    InterferenceParams p = req.params;
    p.degenerate = false;
    p.detuning_hz = detuning;
    return p;
  };
  // Per-pair information at the quadrature point nearest zero delay.
  const auto info = [&](double detuning) {
    const InterferenceParams p = at(detuning);
    return fisher_information(nearest_quadrature_delay(p), p).value;
  };
  // The prior range, centred on quadrature, must sit inside one monotone stretch of the fringe.
  const auto covers = [&](double detuning) {
    const InterferenceParams p = at(detuning);
    const double tq = nearest_quadrature_delay(p), span = range / scale;
    const auto [lo, hi] = branch_window(fringe_branch(tq, p), p);
    return tq - 0.5 * span > lo && tq + 0.5 * span < hi;
  };
  const auto needed = [](double f, double sigma_t) { return std::ceil(1.0 / (f * sigma_t * sigma_t)); };
  const auto half_delay = [](double detuning) { return fringe_half_period_delay(detuning); };
  const auto make_pass = [&](std::size_t i, double n, double f) {
    ScanPass pass;
    pass.detuning_hz = ladder[i];
    pass.n_pairs = n;
    pass.dwell_s = n / req.detected_pair_rate_hz;
    pass.expected_sigma_m = scale / std::sqrt(f * n);
    pass.half_period_depth_m = scale * half_delay(ladder[i]);
    return pass;
  };
  // Largest detuning whose half-period exceeds 5 sigma_t.
  const auto largest_resolvable = [&](double sigma_t) {
    std::size_t best = ladder.size();
    for (std::size_t j = 0; j < ladder.size(); ++j)
      if (half_delay(ladder[j]) > 5.0 * sigma_t) best = j;
    return best;
  };

  const double floor_n = req.min_pairs_per_pass;
  const auto schedule_from = [&](std::size_t cur) -> std::optional<ScanPlan> {
    ScanPlan plan;
    double f = info(ladder[cur]);
    for (;;) {
      if (!(f > 0.0)) return std::nullopt;
      const double n_final = std::max(floor_n, needed(f, target_t));
      double best_cost = kInf, best_n = 0.0;
      for (std::size_t j = cur + 1; j < ladder.size(); ++j) {
        const double h = half_delay(ladder[j]);
        const double n_cur = std::max(floor_n, std::floor(25.0 / (f * h * h)) + 1.0);  // sigma < h / 5
        if (n_cur > req.max_pairs_per_pass) continue;
        const double cost = n_cur + std::max(floor_n, needed(info(ladder[j]), target_t));
        if (cost <= best_cost) {
          best_cost = cost;
          best_n = n_cur;
        }
      }
      if (n_final <= req.max_pairs_per_pass && n_final <= best_cost) {
        plan.passes.push_back(make_pass(cur, n_final, f));
        return plan;
      }
      if (!std::isfinite(best_cost)) return std::nullopt;
      plan.passes.push_back(make_pass(cur, best_n, f));
      cur = largest_resolvable(1.0 / std::sqrt(f * best_n));
      f = info(ladder[cur]);
    }
  };
  const auto total_pairs = [](const ScanPlan& p) {
    double n = 0.0;
    for (const auto& pass : p.passes) n += pass.n_pairs;
    return n;
  };

  std::optional<ScanPlan> best;
  bool covered = false;
  for (std::size_t j = 0; j < ladder.size(); ++j) {
    if (!covers(ladder[j])) continue;
    covered = true;
    auto plan = schedule_from(j);
    if (plan && (!best || total_pairs(*plan) <= total_pairs(*best))) best = std::move(plan);
  }
  if (!covered)
    throw PlanningError("prior depth range exceeds the half-period of every available detuning",
                        kInf);
  if (best) return *best;

  // Infeasible: spend the full budget on every pass and report the best sigma.
  double best_sigma = kInf;
  for (std::size_t start = 0; start < ladder.size(); ++start) {
    if (!covers(ladder[start])) continue;
    std::size_t i = start;
    double f = info(ladder[i]);
    for (;;) {
      if (!(f > 0.0)) break;
      const double sigma_t = 1.0 / std::sqrt(f * req.max_pairs_per_pass);
      best_sigma = std::min(best_sigma, sigma_t * scale);
      const std::size_t next = largest_resolvable(sigma_t);
      if (next == ladder.size() || next <= i) break;
      i = next;
      f = info(ladder[i]);
    }
  }
  throw PlanningError("target sigma unreachable within the pair budget and detuning range",
                      best_sigma);
}

}  // namespace homscope
