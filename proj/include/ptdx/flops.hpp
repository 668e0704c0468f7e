#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace ptdx {

// Tallies multiply-accumulate counts per label. matmul reports batch*M*K*P
// into the label assembled from the active FlopLabelGuard stack, so a model
// run can be decomposed into attention products vs projections per site.
// Counts are in MAC units; the doubled "2 per MAC" convention is a display
// concern (reports print both columns).
class FlopCounter {
 public:
  void clear() { by_label_.clear(); }
  void add(const std::string& label, int64_t macs) { by_label_[label] += macs; }

  int64_t total() const {
    int64_t t = 0;
    for (const auto& [k, v] : by_label_) t += v;
    return t;
  }

  // Sum over labels containing every given fragment.
  int64_t total_matching(std::initializer_list<std::string_view> fragments) const {
    int64_t t = 0;
    for (const auto& [k, v] : by_label_) {
      bool ok = true;
      for (auto f : fragments) {
        if (k.find(f) == std::string::npos) { ok = false; break; }
      }
      if (ok) t += v;
    }
    return t;
  }

  const std::map<std::string, int64_t>& by_label() const { return by_label_; }

 private:
  std::map<std::string, int64_t> by_label_;
};

// Activates a counter for the current thread while in scope.
class FlopTallyGuard {
 public:
  explicit FlopTallyGuard(FlopCounter* counter);
  ~FlopTallyGuard();
  FlopTallyGuard(const FlopTallyGuard&) = delete;
  FlopTallyGuard& operator=(const FlopTallyGuard&) = delete;

 private:
  FlopCounter* prev_;
};

// Pushes one '/'-joined label segment for the scope.
class FlopLabelGuard {
 public:
  explicit FlopLabelGuard(std::string_view segment);
  ~FlopLabelGuard();
  FlopLabelGuard(const FlopLabelGuard&) = delete;
  FlopLabelGuard& operator=(const FlopLabelGuard&) = delete;
};

namespace detail {
FlopCounter* active_flop_counter();
// Label assembled from the guard stack; "unlabeled" when empty.
std::string current_flop_label();
void report_macs(int64_t macs);
}  // namespace detail

}  // namespace ptdx
