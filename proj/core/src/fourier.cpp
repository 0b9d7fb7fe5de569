#include "perfmc/fourier.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace perfmc {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
// Plans are created in-place and unaligned so they can run on any buffer of the
// same geometry.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(Index n1, Index n2, Index t, int sign) {
    const std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(n1, n2, t, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;

    std::vector<cplx> scratch(static_cast<std::size_t>(n1 * n2 * t));
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    const int dims[2] = {static_cast<int>(n1), static_cast<int>(n2)};
    const int dist = static_cast<int>(n1 * n2);
    fftw_plan plan = fftw_plan_many_dft(2, dims, static_cast<int>(t), buf, nullptr, 1, dist, buf, nullptr, 1, dist,
                                        sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) throw NumericalError("FFTW failed to create a plan for " + to_string({n1, n2, t}));
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::tuple<Index, Index, Index, int>, fftw_plan> plans_;
};

void transform(ComplexSeries& x, int sign) {
  if (x.empty()) return;
  fftw_plan plan = PlanCache::instance().get(x.n1(), x.n2(), x.frames(), sign);
  auto* buf = reinterpret_cast<fftw_complex*>(x.data().data());
  fftw_execute_dft(plan, buf, buf);
  x.casorati() *= 1.0 / std::sqrt(static_cast<double>(x.pixels()));
}

}  // namespace

void fft2_frames(ComplexSeries& x) { transform(x, FFTW_FORWARD); }
void ifft2_frames(ComplexSeries& x) { transform(x, FFTW_BACKWARD); }

void apply_mask(ComplexSeries& k, const SamplingMask& mask) {
  require_same_shape(k, mask.keep, "apply_mask");
  auto data = k.data();
  const auto keep = mask.keep.data();
  for (std::size_t i = 0; i < data.size(); ++i)
    if (keep[i] == 0) data[i] = cplx{};
}

KSpaceData forward_undersample(const ComplexSeries& x, const SamplingMask& mask) {
  require_same_shape(x, mask.keep, "forward_undersample");
  KSpaceData d{x, mask};
  fft2_frames(d.samples);
  apply_mask(d.samples, mask);
  return d;
}

ComplexSeries adjoint_undersample(const KSpaceData& d) {
  require_same_shape(d.samples, d.mask.keep, "adjoint_undersample");
  ComplexSeries x = d.samples;
  apply_mask(x, d.mask);
  ifft2_frames(x);
  return x;
}

}  // namespace perfmc
