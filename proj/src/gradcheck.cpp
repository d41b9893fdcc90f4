#include "nag/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "nag/rng.hpp"

namespace nag {

bool GradCheckReport::passed() const {
  return std::all_of(leaves.begin(), leaves.end(), [](const LeafCheck& l) { return l.passed; });
}

const LeafCheck* GradCheckReport::worst() const {
  const LeafCheck* w = nullptr;
  for (const auto& l : leaves)
    if (w == nullptr || l.worst_error > w->worst_error) w = &l;
  return w;
}

std::string GradCheckReport::format() const {
  std::ostringstream os;
  char line[256];
  for (const auto& l : leaves) {
    std::snprintf(line, sizeof(line), "%-4s %-28s checked=%-6zu max_rel_err=%.3e index=%zu analytic=%.10e numeric=%.10e\n",
                  l.passed ? "ok" : "FAIL", l.name.c_str(), l.checked, l.worst_error, l.worst_index,
                  l.analytic, l.numeric);
    os << line;
  }
  if (const LeafCheck* w = worst()) {
    std::snprintf(line, sizeof(line), "%s: tolerance=%.1e worst_leaf=%s max_rel_err=%.3e\n",
                  passed() ? "PASS" : "FAIL", tolerance, w->name.c_str(), w->worst_error);
    os << line;
  }
  return os.str();
}

GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<void()>& loss_and_grad,
                           std::span<ParamLeaf* const> leaves, const GradCheckOptions& options) {
  for (ParamLeaf* leaf : leaves) leaf->zero_grad();
  loss_and_grad();

  GradCheckReport report;
  report.tolerance = options.tolerance;
  auto gen = make_stream(options.seed, "gradcheck.subsample");
  for (ParamLeaf* leaf : leaves) {
    const Tensor2 analytic = leaf->grad;
    std::vector<std::size_t> entries(leaf->value.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (options.max_entries_per_leaf != 0 && entries.size() > options.max_entries_per_leaf) {
      shuffle_in_place(entries.data(), entries.size(), gen);
      entries.resize(options.max_entries_per_leaf);
      std::sort(entries.begin(), entries.end());
    }

    LeafCheck check;
    check.name = leaf->name;
    for (std::size_t idx : entries) {
      double& x = leaf->value.data()[idx];
      const double saved = x;
      x = saved + options.step;
      const double up = loss();
      x = saved - options.step;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic.data()[idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denom_floor});
      const double err = std::abs(a - numeric) / denom;
      ++check.checked;
      if (err > check.worst_error || check.checked == 1) {
        check.worst_error = err;
        check.worst_index = idx;
        check.analytic = a;
        check.numeric = numeric;
      }
    }
    check.passed = check.worst_error <= options.tolerance;
    report.leaves.push_back(std::move(check));
  }
  return report;
}

}  // namespace nag
