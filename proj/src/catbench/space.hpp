#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "catbench/rng.hpp"
#include "json.hpp"

namespace catbench::space {

using json = nlohmann::json;
using BigCount = boost::multiprecision::cpp_int;

enum class ParamKind { ordinal, categorical, permutation };

std::string_view to_string(ParamKind kind);
ParamKind parse_kind(std::string_view text);

struct ParameterDef {
  std::string name;
  ParamKind kind = ParamKind::ordinal;
  std::vector<std::int64_t> values;  // ordinal: strictly increasing
  std::vector<std::string> labels;   // categorical: unique
  int perm_size = 0;                 // permutation of 0..perm_size-1

  static ParameterDef ordinal(std::string name, std::vector<std::int64_t> values);
  static ParameterDef categorical(std::string name, std::vector<std::string> labels);
  static ParameterDef permutation(std::string name, int n);

  BigCount domain_size() const;
  // Width of this parameter's block in the encoded vector.
  std::size_t encoded_width() const;
};

// p[i] is the element placed at position i.
using Permutation = std::vector<int>;
using ParamValue = std::variant<std::int64_t, std::string, Permutation>;

// One value per parameter, in the owning space's parameter order.
struct Configuration {
  std::vector<ParamValue> values;

  friend bool operator==(const Configuration &, const Configuration &) = default;
  friend auto operator<=>(const Configuration &, const Configuration &) = default;
};

class SearchSpace;

// Known-constraint expression. Source grammar:
//   expr    := or
//   or      := and ('||' and)*
//   and     := cmp ('&&' cmp)*
//   cmp     := sum (('=='|'!='|'<'|'<='|'>'|'>=') sum)?
//   sum     := prod (('+'|'-') prod)*
//   prod    := unary (('*'|'/'|'%') unary)*
//   unary   := ('!'|'-') unary | primary
//   primary := INT | "label" | true | false | IDENT | '(' expr ')'
//            | at(PERM, INT-expr) | precedes(PERM, INT-expr, INT-expr)
// Division and modulo by zero evaluate to 0 and to the dividend respectively;
// at() with an out-of-range index yields -1, precedes() on an absent element
// yields false. Evaluation is therefore total.
class ConstraintExpr {
 public:
  struct Node;

  static ConstraintExpr parse(std::string_view source,
                              const std::vector<ParameterDef> &params);

  bool evaluate(const Configuration &config) const;
  const std::string &source() const noexcept { return source_; }
  const std::vector<std::string> &referenced() const noexcept { return referenced_; }

 private:
  std::shared_ptr<const Node> root_;
  std::string source_;
  std::vector<std::string> referenced_;
};

class SearchSpace {
 public:
  SearchSpace() = default;
  SearchSpace(std::vector<ParameterDef> parameters,
              const std::vector<std::string> &constraint_sources = {});

  const std::vector<ParameterDef> &parameters() const noexcept { return parameters_; }
  const std::vector<ConstraintExpr> &constraints() const noexcept { return constraints_; }
  std::size_t dimensions() const noexcept { return parameters_.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  const ParameterDef &parameter(std::string_view name) const;

  std::size_t encoded_width() const noexcept { return encoded_width_; }
  // Offset of parameter i's block in the encoded vector.
  std::size_t encoded_offset(std::size_t i) const { return offsets_.at(i); }

  // Throws InvalidConfigError unless every value is in its domain.
  void check_domain(const Configuration &config) const;
  bool in_domain(const Configuration &config) const;

  // Rank of a value within its parameter's domain (ordinal/categorical).
  std::size_t rank(std::size_t param, const ParamValue &value) const;

  json config_to_json(const Configuration &config) const;
  // Throws InvalidConfigError for missing, unknown, or out-of-domain entries.
  Configuration config_from_json(const json &object) const;
  std::string describe(const Configuration &config) const;

  json to_json() const;
  static SearchSpace from_json(const json &document);

 private:
  std::vector<ParameterDef> parameters_;
  std::vector<ConstraintExpr> constraints_;
  std::vector<std::size_t> offsets_;
  std::size_t encoded_width_ = 0;
};

struct Verdict {
  bool valid = true;
  std::vector<int> violated;  // indices into the space's constraint list
};

struct Enumeration {
  std::vector<Configuration> configs;
  double ratio = 0.0;
  BigCount cardinality;
};

BigCount cardinality(const SearchSpace &space);

// Evaluates known constraints only; hidden constraints surface at execution.
Verdict validate(const SearchSpace &space, const Configuration &config);

// Uniform per-parameter draw with rejection. The draw budget is
// budget_factor * n; exhausting it throws infeasible_space.
std::vector<Configuration> sample_valid(const SearchSpace &space, std::uint64_t seed,
                                        std::size_t n,
                                        std::uint64_t budget_factor = 10'000);

// One uniform draw over the full space S, ignoring constraints.
Configuration sample_any(const SearchSpace &space, Rng &rng);

// All known-valid configurations in lexicographic parameter order. Throws
// too_large when cardinality exceeds cap.
Enumeration enumerate_valid(const SearchSpace &space, std::uint64_t cap);

std::vector<double> encode(const SearchSpace &space, const Configuration &config);

// Mean over parameters of per-kind distances, in [0, 1].
double distance(const SearchSpace &space, const Configuration &a, const Configuration &b);

// Normalized Kendall-tau distance between two permutations of equal size.
double kendall_tau_distance(const Permutation &a, const Permutation &b);

// One-step moves: one ordinal by one rank, one categorical to any other label,
// or one adjacent transposition in one permutation. Not filtered by validity.
std::vector<Configuration> neighbors(const SearchSpace &space, const Configuration &config);

}  // namespace catbench::space
