#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace rex {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define REX_ERROR(Name)                  \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

REX_ERROR(DimensionTooLarge);
REX_ERROR(DimensionMismatch);
REX_ERROR(PreconditionViolation);
REX_ERROR(IndexOutOfRange);
REX_ERROR(EmptyBackground);
REX_ERROR(EmptyDataset);
REX_ERROR(ProductTooLarge);
REX_ERROR(DegenerateBounds);
REX_ERROR(DegenerateColumn);
REX_ERROR(NotPositiveDefinite);
REX_ERROR(NoMatchingRows);
REX_ERROR(MissingCoverage);
REX_ERROR(MissingSubsetModel);
REX_ERROR(InvalidDistribution);
REX_ERROR(RankDeficient);
REX_ERROR(NonBinaryLabels);
REX_ERROR(SingularSystem);
REX_ERROR(Infeasible);
REX_ERROR(InvalidK);
REX_ERROR(ZeroSum);
REX_ERROR(NegativeEntry);
REX_ERROR(UnknownPreset);
REX_ERROR(ParseError);
REX_ERROR(SchemaMismatch);

#undef REX_ERROR

// ---------------------------------------------------------------------------
// Feature subsets
// ---------------------------------------------------------------------------

// Bitmask dimensions: bit i set <=> feature i is present. Exhaustive
// enumeration is capped well below the 64-bit representation limit.
inline constexpr int kMaxDim = 63;
inline constexpr int kMaxEnumerationDim = 25;

class FeatureSubset {
 public:
  FeatureSubset() = default;
  FeatureSubset(std::uint64_t bits, int dim);

  static FeatureSubset empty(int dim) { return {0, dim}; }
  static FeatureSubset full(int dim);
  static FeatureSubset of(std::initializer_list<int> members, int dim);

  std::uint64_t bits() const { return bits_; }
  int dim() const { return dim_; }
  int count() const;
  bool is_empty() const { return bits_ == 0; }
  bool is_full() const { return *this == full(dim_); }

  bool contains(int i) const;
  FeatureSubset with(int i) const;
  FeatureSubset without(int i) const;
  FeatureSubset complement() const;
  std::vector<int> members() const;

  friend bool operator==(const FeatureSubset&, const FeatureSubset&) = default;

 private:
  std::uint64_t bits_ = 0;
  int dim_ = 0;
};

FeatureSubset subset_complement(const FeatureSubset& s);

// All 2^d subsets in ascending bitmask order. Throws DimensionTooLarge when
// d exceeds kMaxEnumerationDim.
std::vector<FeatureSubset> enumerate_subsets(int d);

// ---------------------------------------------------------------------------
// Deterministic counter-based random numbers
//
// All sampling in the library goes through Rng seeded by pure functions of
// (base seed, subset, sample index, row index). Results are therefore
// independent of evaluation order, thread count, and platform.
// ---------------------------------------------------------------------------

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t sample_seed(std::uint64_t base, std::uint64_t subset_bits,
                          std::uint64_t sample_index);
std::uint64_t row_seed(std::uint64_t base, std::uint64_t row_index);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller.
  double normal();
  // Uniform index in [0, n).
  std::size_t uniform_index(std::size_t n);

 private:
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Models and subset functions
// ---------------------------------------------------------------------------

class PredictionModel {
 public:
  using Fn = std::function<std::vector<double>(std::span<const double>)>;

  PredictionModel() = default;
  PredictionModel(int dim, int out_dim, Fn fn);

  int dim() const { return dim_; }
  int out_dim() const { return out_dim_; }
  std::vector<double> operator()(std::span<const double> x) const;

 private:
  int dim_ = 0;
  int out_dim_ = 0;
  Fn fn_;
};

// F(x, S): prediction given that only the features in S are known.
// Strategies constructed in removal.hpp short-circuit S = D to the
// underlying model, so extensions agree with it bit-exactly.
class SubsetFunction {
 public:
  using Fn = std::function<std::vector<double>(std::span<const double>,
                                               const FeatureSubset&,
                                               std::uint64_t)>;

  SubsetFunction() = default;
  SubsetFunction(int dim, int out_dim, bool invariant,
                 std::optional<PredictionModel> extension_of, Fn fn);

  int dim() const { return dim_; }
  int out_dim() const { return out_dim_; }
  bool is_invariant() const { return invariant_; }
  const std::optional<PredictionModel>& extension_of() const {
    return extension_of_;
  }

  std::vector<double> evaluate(std::span<const double> x,
                               const FeatureSubset& s,
                               std::uint64_t seed = 0) const;

 private:
  int dim_ = 0;
  int out_dim_ = 0;
  bool invariant_ = true;
  std::optional<PredictionModel> extension_of_;
  Fn fn_;
};

// True iff F(x, s) == F(x_alt, s) elementwise, exactly. Throws
// PreconditionViolation unless x and x_alt agree on the coordinates in s.
bool check_invariance(const SubsetFunction& f, std::span<const double> x,
                      std::span<const double> x_alt, const FeatureSubset& s,
                      std::uint64_t seed);

// True iff F(x, D) == f(x) exactly for every probe.
bool check_extension(const SubsetFunction& f, const PredictionModel& model,
                     std::span<const std::vector<double>> probes);

// ---------------------------------------------------------------------------
// Set functions u: P(D) -> R
// ---------------------------------------------------------------------------

// Memoizing evaluator. Copies share the cache. Safe for concurrent readers;
// concurrent evaluations of the same subset return the same value and count
// as one distinct evaluation.
class SetFunction {
 public:
  using Fn = std::function<double(const FeatureSubset&)>;

  SetFunction() = default;
  SetFunction(int dim, Fn fn);

  int dim() const;
  double operator()(const FeatureSubset& s) const;
  std::size_t eval_count() const;

  // Evaluates the given subsets into the cache, splitting the uncached work
  // across `threads` threads. Values are identical to sequential evaluation.
  void prefetch(std::span<const FeatureSubset> subsets, int threads = 1) const;

 private:
  struct State;
  std::shared_ptr<State> state_;
};

// ---------------------------------------------------------------------------
// Explanations
// ---------------------------------------------------------------------------

enum class ExplanationKind { attribution, selection };

struct Explanation {
  ExplanationKind kind = ExplanationKind::attribution;
  std::vector<double> scores;                   // attribution only
  std::optional<std::vector<double>> stderrs;   // attribution only, >= 0
  std::optional<FeatureSubset> selected;        // selection only
  std::string method;
  std::size_t evaluations_used = 0;

  static Explanation attribution(std::vector<double> scores,
                                 std::string method,
                                 std::size_t evaluations_used);
  static Explanation attribution(std::vector<double> scores,
                                 std::vector<double> stderrs,
                                 std::string method,
                                 std::size_t evaluations_used);
  static Explanation selection(FeatureSubset selected, std::string method,
                               std::size_t evaluations_used);
};

}  // namespace rex
