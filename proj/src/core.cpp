#include "rex/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>
#include <thread>

namespace rex {

// ---------------------------------------------------------------------------
// FeatureSubset
// ---------------------------------------------------------------------------

FeatureSubset::FeatureSubset(std::uint64_t bits, int dim)
    : bits_(bits), dim_(dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw DimensionMismatch("subset dimension must be in [1, 63], got " +
                            std::to_string(dim));
  }
  const std::uint64_t mask = full(dim).bits_;
  if ((bits & ~mask) != 0) {
    throw DimensionMismatch("subset has bits set at or above dimension " +
                            std::to_string(dim));
  }
}

FeatureSubset FeatureSubset::full(int dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw DimensionMismatch("subset dimension must be in [1, 63], got " +
                            std::to_string(dim));
  }
  FeatureSubset s;
  s.bits_ = (std::uint64_t{1} << dim) - 1;
  s.dim_ = dim;
  return s;
}

FeatureSubset FeatureSubset::of(std::initializer_list<int> members, int dim) {
  std::uint64_t bits = 0;
  for (int i : members) {
    if (i < 0 || i >= dim) {
      throw IndexOutOfRange("feature index " + std::to_string(i) +
                            " outside dimension " + std::to_string(dim));
    }
    bits |= std::uint64_t{1} << i;
  }
  return {bits, dim};
}

int FeatureSubset::count() const { return std::popcount(bits_); }

bool FeatureSubset::contains(int i) const {
  return i >= 0 && i < dim_ && ((bits_ >> i) & 1) != 0;
}

FeatureSubset FeatureSubset::with(int i) const {
  if (i < 0 || i >= dim_) {
    throw IndexOutOfRange("feature index " + std::to_string(i));
  }
  return {bits_ | (std::uint64_t{1} << i), dim_};
}

FeatureSubset FeatureSubset::without(int i) const {
  if (i < 0 || i >= dim_) {
    throw IndexOutOfRange("feature index " + std::to_string(i));
  }
  return {bits_ & ~(std::uint64_t{1} << i), dim_};
}

FeatureSubset FeatureSubset::complement() const {
  return {bits_ ^ full(dim_).bits_, dim_};
}

std::vector<int> FeatureSubset::members() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count()));
  for (int i = 0; i < dim_; ++i) {
    if (contains(i)) out.push_back(i);
  }
  return out;
}

FeatureSubset subset_complement(const FeatureSubset& s) {
  return s.complement();
}

std::vector<FeatureSubset> enumerate_subsets(int d) {
  if (d < 1) {
    throw DimensionMismatch("enumerate_subsets requires d >= 1");
  }
  if (d > kMaxEnumerationDim) {
    throw DimensionTooLarge("exhaustive enumeration is capped at d <= " +
                            std::to_string(kMaxEnumerationDim) + ", got " +
                            std::to_string(d));
  }
  const std::uint64_t total = std::uint64_t{1} << d;
  std::vector<FeatureSubset> out;
  out.reserve(total);
  for (std::uint64_t bits = 0; bits < total; ++bits) {
    out.emplace_back(bits, d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------

namespace {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kSampleTag = 0xA076'1D64'78BD'642FULL;
constexpr std::uint64_t kRowTag = 0xE703'7ED1'A0B4'28DBULL;

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t state = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  return splitmix64(state);
}

std::uint64_t sample_seed(std::uint64_t base, std::uint64_t subset_bits,
                          std::uint64_t sample_index) {
  return mix_seed(mix_seed(mix_seed(base, kSampleTag), subset_bits),
                  sample_index);
}

std::uint64_t row_seed(std::uint64_t base, std::uint64_t row_index) {
  return mix_seed(mix_seed(base, kRowTag), row_index);
}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double Rng::normal() {
  // Box-Muller; u clamped away from 0 so log stays finite.
  double u = uniform01();
  if (u <= 0.0) u = 0x1.0p-53;
  const double v = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u));
  return r * std::cos(6.283185307179586476925286766559 * v);
}

std::size_t Rng::uniform_index(std::size_t n) {
  // Rejection-free modulo is fine at desk scale; bias is < n / 2^64.
  return static_cast<std::size_t>(next_u64() % n);
}

// ---------------------------------------------------------------------------
// PredictionModel / SubsetFunction
// ---------------------------------------------------------------------------

PredictionModel::PredictionModel(int dim, int out_dim, Fn fn)
    : dim_(dim), out_dim_(out_dim), fn_(std::move(fn)) {
  if (dim < 1 || out_dim < 1) {
    throw DimensionMismatch("model dimensions must be positive");
  }
}

std::vector<double> PredictionModel::operator()(
    std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) {
    throw DimensionMismatch("model expects " + std::to_string(dim_) +
                            " features, got " + std::to_string(x.size()));
  }
  return fn_(x);
}

SubsetFunction::SubsetFunction(int dim, int out_dim, bool invariant,
                               std::optional<PredictionModel> extension_of,
                               Fn fn)
    : dim_(dim),
      out_dim_(out_dim),
      invariant_(invariant),
      extension_of_(std::move(extension_of)),
      fn_(std::move(fn)) {
  if (extension_of_ && extension_of_->dim() != dim) {
    throw DimensionMismatch("extension dimension mismatch");
  }
}

std::vector<double> SubsetFunction::evaluate(std::span<const double> x,
                                             const FeatureSubset& s,
                                             std::uint64_t seed) const {
  if (static_cast<int>(x.size()) != dim_ || s.dim() != dim_) {
    throw DimensionMismatch("subset function expects dimension " +
                            std::to_string(dim_));
  }
  return fn_(x, s, seed);
}

bool check_invariance(const SubsetFunction& f, std::span<const double> x,
                      std::span<const double> x_alt, const FeatureSubset& s,
                      std::uint64_t seed) {
  if (x.size() != x_alt.size() ||
      static_cast<int>(x.size()) != f.dim()) {
    throw DimensionMismatch("check_invariance dimension mismatch");
  }
  for (int i : s.members()) {
    if (x[static_cast<std::size_t>(i)] != x_alt[static_cast<std::size_t>(i)]) {
      throw PreconditionViolation(
          "probe vectors must agree on the retained coordinates");
    }
  }
  return f.evaluate(x, s, seed) == f.evaluate(x_alt, s, seed);
}

bool check_extension(const SubsetFunction& f, const PredictionModel& model,
                     std::span<const std::vector<double>> probes) {
  const FeatureSubset all = FeatureSubset::full(f.dim());
  for (const auto& x : probes) {
    if (f.evaluate(x, all, 0) != model(x)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// SetFunction
// ---------------------------------------------------------------------------

struct SetFunction::State {
  int dim = 0;
  Fn fn;
  mutable std::unordered_map<std::uint64_t, double> cache;
  mutable std::shared_mutex mutex;
};

SetFunction::SetFunction(int dim, Fn fn) : state_(std::make_shared<State>()) {
  if (dim < 1 || dim > kMaxDim) {
    throw DimensionMismatch("set function dimension must be in [1, 63]");
  }
  state_->dim = dim;
  state_->fn = std::move(fn);
}

int SetFunction::dim() const { return state_->dim; }

double SetFunction::operator()(const FeatureSubset& s) const {
  if (s.dim() != state_->dim) {
    throw DimensionMismatch("set function expects dimension " +
                            std::to_string(state_->dim));
  }
  {
    std::shared_lock lock(state_->mutex);
    auto it = state_->cache.find(s.bits());
    if (it != state_->cache.end()) return it->second;
  }
  const double value = state_->fn(s);
  std::unique_lock lock(state_->mutex);
  auto [it, inserted] = state_->cache.emplace(s.bits(), value);
  return it->second;
}

std::size_t SetFunction::eval_count() const {
  std::shared_lock lock(state_->mutex);
  return state_->cache.size();
}

void SetFunction::prefetch(std::span<const FeatureSubset> subsets,
                           int threads) const {
  std::vector<FeatureSubset> pending;
  {
    std::shared_lock lock(state_->mutex);
    for (const auto& s : subsets) {
      if (!state_->cache.contains(s.bits())) pending.push_back(s);
    }
  }
  std::sort(pending.begin(), pending.end(),
            [](const FeatureSubset& a, const FeatureSubset& b) {
              return a.bits() < b.bits();
            });
  pending.erase(std::unique(pending.begin(), pending.end()), pending.end());
  if (pending.empty()) return;

  if (threads <= 1 || pending.size() == 1) {
    for (const auto& s : pending) (*this)(s);
    return;
  }

  const int n_threads =
      std::min<int>(threads, static_cast<int>(pending.size()));
  std::vector<double> values(pending.size());
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) {
    workers.emplace_back([&, t] {
      for (std::size_t i = static_cast<std::size_t>(t); i < pending.size();
           i += static_cast<std::size_t>(n_threads)) {
        values[i] = state_->fn(pending[i]);
      }
    });
  }
  for (auto& w : workers) w.join();

  std::unique_lock lock(state_->mutex);
  for (std::size_t i = 0; i < pending.size(); ++i) {
    state_->cache.emplace(pending[i].bits(), values[i]);
  }
}

// ---------------------------------------------------------------------------
// Explanation
// ---------------------------------------------------------------------------

Explanation Explanation::attribution(std::vector<double> scores,
                                     std::string method,
                                     std::size_t evaluations_used) {
  Explanation e;
  e.kind = ExplanationKind::attribution;
  e.scores = std::move(scores);
  e.method = std::move(method);
  e.evaluations_used = evaluations_used;
  return e;
}

Explanation Explanation::attribution(std::vector<double> scores,
                                     std::vector<double> stderrs,
                                     std::string method,
                                     std::size_t evaluations_used) {
  Explanation e = attribution(std::move(scores), std::move(method),
                              evaluations_used);
  e.stderrs = std::move(stderrs);
  return e;
}

Explanation Explanation::selection(FeatureSubset selected, std::string method,
                                   std::size_t evaluations_used) {
  Explanation e;
  e.kind = ExplanationKind::selection;
  e.selected = selected;
  e.method = std::move(method);
  e.evaluations_used = evaluations_used;
  return e;
}

}  // namespace rex
