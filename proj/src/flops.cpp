#include "ptdx/flops.hpp"

#include <vector>

namespace ptdx {

namespace {
thread_local FlopCounter* g_counter = nullptr;
thread_local std::vector<std::string> g_labels;
}  // namespace

FlopTallyGuard::FlopTallyGuard(FlopCounter* counter) : prev_(g_counter) { g_counter = counter; }
FlopTallyGuard::~FlopTallyGuard() { g_counter = prev_; }

FlopLabelGuard::FlopLabelGuard(std::string_view segment) { g_labels.emplace_back(segment); }
FlopLabelGuard::~FlopLabelGuard() { g_labels.pop_back(); }

namespace detail {

FlopCounter* active_flop_counter() { return g_counter; }

std::string current_flop_label() {
  if (g_labels.empty()) return "unlabeled";
  std::string out;
  for (size_t i = 0; i < g_labels.size(); ++i) {
    if (i) out += '/';
    out += g_labels[i];
  }
  return out;
}

void report_macs(int64_t macs) {
  if (g_counter != nullptr) g_counter->add(current_flop_label(), macs);
}

}  // namespace detail
}  // namespace ptdx
