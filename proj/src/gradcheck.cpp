#include "ramen/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ramen {

const GradCheckEntry* GradCheckReport::worst() const {
  const GradCheckEntry* w = nullptr;
  for (const auto& e : entries) {
    if (!w || e.max_rel_err > w->max_rel_err) w = &e;
  }
  return w;
}

GradCheckReport grad_check(const std::function<Tensor()>& f, const ParamList& params,
                           double eps, double tol) {
  // analytic pass
  for (const auto& [name, p] : params) p.impl()->grad.clear();
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = f();
    tape.backward(loss);
  }
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) {
    analytic.push_back(p.has_grad() ? p.grad() : std::vector<double>(p.numel(), 0.0));
  }

  // numeric pass: central differences, evaluated off-tape
  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const auto& [name, p] = params[pi];
    GradCheckEntry entry;
    entry.name = name;
    auto& values = p.impl()->data;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = f().item();
      values[i] = saved - eps;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double rel =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    entry.ok = entry.max_rel_err <= tol;
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.all_ok = report.all_ok && entry.ok;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace ramen
