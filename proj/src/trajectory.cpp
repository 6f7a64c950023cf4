#include "pathwise/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace pathwise {

namespace {

void append_g17(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

Trajectory::Trajectory(double x0, double mu, double sigma,
                       std::vector<double> grid, std::vector<double> log_cont,
                       std::vector<Jump> jumps)
    : x0_(x0),
      mu_(mu),
      sigma_(sigma),
      grid_(std::move(grid)),
      log_cont_(std::move(log_cont)),
      jumps_(std::move(jumps)) {
  if (!(x0_ > 0.0)) throw std::invalid_argument("trajectory x0 must be positive");
  if (sigma_ < 0.0) throw std::invalid_argument("trajectory sigma must be >= 0");
  if (grid_.size() < 2 || grid_.size() != log_cont_.size()) {
    throw std::invalid_argument("trajectory grid/log arrays inconsistent");
  }
  if (grid_.front() != 0.0 || log_cont_.front() != 0.0) {
    throw std::invalid_argument("trajectory must start at t=0 with z(0)=0");
  }
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    if (!(grid_[i] > grid_[i - 1])) {
      throw std::invalid_argument("trajectory master grid must be strictly increasing");
    }
  }
  const double horizon = grid_.back();
  double prev = 0.0;
  jump_prefix_.reserve(jumps_.size() + 1);
  jump_prefix_.push_back(1.0);
  for (const Jump& j : jumps_) {
    if (!(j.time > prev) || !(j.time < horizon)) {
      throw std::invalid_argument("jump times must be strictly interior and increasing");
    }
    if (!(j.factor > 0.0)) {
      throw std::invalid_argument("jump factors must be positive (a > -1)");
    }
    prev = j.time;
    jump_prefix_.push_back(jump_prefix_.back() * j.factor);
  }
}

std::size_t Trajectory::locate_cell(double t) const {
  // Index k with grid_[k] <= t < grid_[k+1] (last cell closed on the right).
  auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
  std::size_t k = static_cast<std::size_t>(it - grid_.begin());
  if (k == 0) return 0;
  if (k >= grid_.size()) return grid_.size() - 2;
  return k - 1;
}

double Trajectory::log_component(double t) const {
  if (t < 0.0 || t > horizon()) {
    throw std::invalid_argument("trajectory evaluated outside [0, T]");
  }
  const std::size_t k = locate_cell(t);
  if (t == grid_[k]) return log_cont_[k];
  if (t == grid_[k + 1]) return log_cont_[k + 1];
  const double w = (t - grid_[k]) / (grid_[k + 1] - grid_[k]);
  return log_cont_[k] + w * (log_cont_[k + 1] - log_cont_[k]);
}

double Trajectory::jump_product_through(double t) const {
  auto it = std::upper_bound(
      jumps_.begin(), jumps_.end(), t,
      [](double tt, const Jump& j) { return tt < j.time; });
  return jump_prefix_[static_cast<std::size_t>(it - jumps_.begin())];
}

double Trajectory::jump_product_before(double t) const {
  auto it = std::lower_bound(
      jumps_.begin(), jumps_.end(), t,
      [](const Jump& j, double tt) { return j.time < tt; });
  return jump_prefix_[static_cast<std::size_t>(it - jumps_.begin())];
}

double Trajectory::value(double t) const {
  return x0_ * std::exp(mu_ * t + sigma_ * log_component(t)) *
         jump_product_through(t);
}

double Trajectory::left_value(double t) const {
  // z is continuous, so the left limit differs only in the jump product.
  return x0_ * std::exp(mu_ * t + sigma_ * log_component(t)) *
         jump_product_before(t);
}

Trajectory::Evaluation Trajectory::evaluate(double t) const {
  const double base = x0_ * std::exp(mu_ * t + sigma_ * log_component(t));
  const double left = base * jump_product_before(t);
  const double right = base * jump_product_through(t);
  return {left, right, right - left};
}

double Trajectory::grid_min() const {
  double m = value(0.0);
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    m = std::min(m, x0_ * std::exp(mu_ * grid_[k] + sigma_ * log_cont_[k]) *
                        jump_product_through(grid_[k]));
  }
  for (const Jump& j : jumps_) {
    const Evaluation e = evaluate(j.time);
    m = std::min(m, std::min(e.left, e.right));
  }
  return m;
}

double Trajectory::grid_max() const {
  double m = value(0.0);
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    m = std::max(m, x0_ * std::exp(mu_ * grid_[k] + sigma_ * log_cont_[k]) *
                        jump_product_through(grid_[k]));
  }
  for (const Jump& j : jumps_) {
    const Evaluation e = evaluate(j.time);
    m = std::max(m, std::max(e.left, e.right));
  }
  return m;
}

namespace {

// Segment boundaries of [0, t]: grid nodes plus jump times, each jump
// contributing both one-sided values through the callback.
template <typename Visit>
void scan_segment_values(const Trajectory& x, double t, bool closed,
                         Visit&& visit) {
  const auto& grid = x.grid();
  for (double node : grid) {
    if (node > t) break;
    if (node == t && !closed) break;
    visit(x.value(node));
  }
  for (const Jump& j : x.jumps()) {
    if (j.time > t) break;
    const Trajectory::Evaluation e = x.evaluate(j.time);
    visit(e.left);
    if (j.time < t || closed) visit(e.right);
  }
  visit(x.left_value(t));
  if (closed) visit(x.value(t));
}

}  // namespace

double Trajectory::running_min(double t, bool closed) const {
  double m = value(0.0);
  scan_segment_values(*this, t, closed, [&m](double v) { m = std::min(m, v); });
  return m;
}

double Trajectory::running_max(double t, bool closed) const {
  double m = value(0.0);
  scan_segment_values(*this, t, closed, [&m](double v) { m = std::max(m, v); });
  return m;
}

double Trajectory::running_average(double t, bool closed) const {
  (void)closed;  // point values carry zero measure
  if (t <= 0.0) return value(0.0);
  // Breakpoints: grid nodes below t, jump times, then t itself.
  std::vector<double> cuts;
  cuts.push_back(0.0);
  for (double node : grid_) {
    if (node <= 0.0) continue;
    if (node >= t) break;
    cuts.push_back(node);
  }
  for (const Jump& j : jumps_) {
    if (j.time >= t) break;
    if (j.time > 0.0) cuts.push_back(j.time);
  }
  cuts.push_back(t);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    // Right value at the segment start, left value at its end: segments are
    // jump-free inside, so this is the trapezoid rule on a continuous piece.
    integral += 0.5 * (value(a) + left_value(b)) * (b - a);
  }
  // Point values carry zero measure; open/closed variants coincide.
  return integral / t;
}

void Trajectory::write_csv(std::ostream& os) const {
  std::string out;
  out += "x0,mu,sigma,T\n";
  append_g17(out, x0_);
  out += ',';
  append_g17(out, mu_);
  out += ',';
  append_g17(out, sigma_);
  out += ',';
  append_g17(out, horizon());
  out += '\n';
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    out += "node,";
    append_g17(out, grid_[k]);
    out += ',';
    append_g17(out, log_cont_[k]);
    out += '\n';
  }
  for (const Jump& j : jumps_) {
    out += "jump,";
    append_g17(out, j.time);
    out += ',';
    append_g17(out, j.factor);
    out += '\n';
  }
  os << out;
}

Trajectory Trajectory::read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("x0,mu,sigma,T", 0) != 0) {
    throw std::invalid_argument("trajectory csv: missing header row");
  }
  if (!std::getline(is, line)) {
    throw std::invalid_argument("trajectory csv: missing parameter row");
  }
  double x0 = 0.0, mu = 0.0, sigma = 0.0, horizon = 0.0;
  if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &x0, &mu, &sigma, &horizon) != 4) {
    throw std::invalid_argument("trajectory csv: bad parameter row");
  }
  std::vector<double> grid, zs;
  std::vector<Jump> jumps;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    double a = 0.0, b = 0.0;
    if (line.rfind("node,", 0) == 0) {
      if (std::sscanf(line.c_str() + 5, "%lf,%lf", &a, &b) != 2) {
        throw std::invalid_argument("trajectory csv: bad node row");
      }
      grid.push_back(a);
      zs.push_back(b);
    } else if (line.rfind("jump,", 0) == 0) {
      if (std::sscanf(line.c_str() + 5, "%lf,%lf", &a, &b) != 2) {
        throw std::invalid_argument("trajectory csv: bad jump row");
      }
      jumps.push_back({a, b});
    } else {
      throw std::invalid_argument("trajectory csv: unknown row: " + line);
    }
  }
  if (grid.empty() || grid.back() != horizon) {
    throw std::invalid_argument("trajectory csv: node rows do not cover [0, T]");
  }
  return Trajectory(x0, mu, sigma, std::move(grid), std::move(zs), std::move(jumps));
}

}  // namespace pathwise
