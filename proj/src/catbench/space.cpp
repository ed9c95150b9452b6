#include "catbench/space.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "catbench/error.hpp"

namespace catbench::space {

namespace {

[[noreturn]] void malformed(const std::string &what) {
  throw Error(ErrorCode::malformed_space, what);
}

bool is_permutation_of_range(const Permutation &p, int n) {
  if (static_cast<int>(p.size()) != n) return false;
  std::vector<char> seen(n, 0);
  for (int e : p) {
    if (e < 0 || e >= n || seen[e]) return false;
    seen[e] = 1;
  }
  return true;
}

}  // namespace

std::string_view to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::ordinal: return "ordinal";
    case ParamKind::categorical: return "categorical";
    case ParamKind::permutation: return "permutation";
  }
  return "?";
}

ParamKind parse_kind(std::string_view text) {
  if (text == "ordinal") return ParamKind::ordinal;
  if (text == "categorical") return ParamKind::categorical;
  if (text == "permutation") return ParamKind::permutation;
  malformed("unknown parameter kind '" + std::string(text) + "'");
}

ParameterDef ParameterDef::ordinal(std::string name, std::vector<std::int64_t> values) {
  ParameterDef p;
  p.name = std::move(name);
  p.kind = ParamKind::ordinal;
  p.values = std::move(values);
  return p;
}

ParameterDef ParameterDef::categorical(std::string name, std::vector<std::string> labels) {
  ParameterDef p;
  p.name = std::move(name);
  p.kind = ParamKind::categorical;
  p.labels = std::move(labels);
  return p;
}

ParameterDef ParameterDef::permutation(std::string name, int n) {
  ParameterDef p;
  p.name = std::move(name);
  p.kind = ParamKind::permutation;
  p.perm_size = n;
  return p;
}

BigCount ParameterDef::domain_size() const {
  switch (kind) {
    case ParamKind::ordinal: return BigCount(values.size());
    case ParamKind::categorical: return BigCount(labels.size());
    case ParamKind::permutation: {
      BigCount f = 1;
      for (int i = 2; i <= perm_size; ++i) f *= i;
      return f;
    }
  }
  return 0;
}

std::size_t ParameterDef::encoded_width() const {
  switch (kind) {
    case ParamKind::ordinal: return 1;
    case ParamKind::categorical: return labels.size();
    case ParamKind::permutation: return static_cast<std::size_t>(perm_size);
  }
  return 0;
}

SearchSpace::SearchSpace(std::vector<ParameterDef> parameters,
                         const std::vector<std::string> &constraint_sources)
    : parameters_(std::move(parameters)) {
  std::set<std::string> names;
  for (const auto &p : parameters_) {
    if (p.name.empty()) malformed("parameter with empty name");
    if (!names.insert(p.name).second) malformed("duplicate parameter '" + p.name + "'");
    switch (p.kind) {
      case ParamKind::ordinal:
        if (p.values.empty()) malformed("ordinal '" + p.name + "' has no values");
        for (std::size_t i = 1; i < p.values.size(); ++i)
          if (p.values[i] <= p.values[i - 1])
            malformed("ordinal '" + p.name + "' values must be strictly increasing");
        break;
      case ParamKind::categorical: {
        if (p.labels.empty()) malformed("categorical '" + p.name + "' has no labels");
        std::set<std::string> uniq(p.labels.begin(), p.labels.end());
        if (uniq.size() != p.labels.size())
          malformed("categorical '" + p.name + "' labels must be unique");
        break;
      }
      case ParamKind::permutation:
        if (p.perm_size < 1) malformed("permutation '" + p.name + "' needs n >= 1");
        break;
    }
    offsets_.push_back(encoded_width_);
    encoded_width_ += p.encoded_width();
  }
  for (const auto &src : constraint_sources)
    constraints_.push_back(ConstraintExpr::parse(src, parameters_));
}

std::optional<std::size_t> SearchSpace::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < parameters_.size(); ++i)
    if (parameters_[i].name == name) return i;
  return std::nullopt;
}

const ParameterDef &SearchSpace::parameter(std::string_view name) const {
  auto i = index_of(name);
  if (!i) throw Error(ErrorCode::invalid_argument, "unknown parameter '" + std::string(name) + "'");
  return parameters_[*i];
}

bool SearchSpace::in_domain(const Configuration &config) const {
  if (config.values.size() != parameters_.size()) return false;
  for (std::size_t i = 0; i < parameters_.size(); ++i) {
    const auto &p = parameters_[i];
    const auto &v = config.values[i];
    switch (p.kind) {
      case ParamKind::ordinal: {
        auto *x = std::get_if<std::int64_t>(&v);
        if (!x || !std::binary_search(p.values.begin(), p.values.end(), *x)) return false;
        break;
      }
      case ParamKind::categorical: {
        auto *x = std::get_if<std::string>(&v);
        if (!x || std::find(p.labels.begin(), p.labels.end(), *x) == p.labels.end())
          return false;
        break;
      }
      case ParamKind::permutation: {
        auto *x = std::get_if<Permutation>(&v);
        if (!x || !is_permutation_of_range(*x, p.perm_size)) return false;
        break;
      }
    }
  }
  return true;
}

void SearchSpace::check_domain(const Configuration &config) const {
  if (!in_domain(config))
    throw InvalidConfigError("configuration outside the search space: " + describe(config));
}

std::size_t SearchSpace::rank(std::size_t param, const ParamValue &value) const {
  const auto &p = parameters_.at(param);
  switch (p.kind) {
    case ParamKind::ordinal: {
      auto x = std::get<std::int64_t>(value);
      return static_cast<std::size_t>(
          std::lower_bound(p.values.begin(), p.values.end(), x) - p.values.begin());
    }
    case ParamKind::categorical: {
      const auto &x = std::get<std::string>(value);
      return static_cast<std::size_t>(std::find(p.labels.begin(), p.labels.end(), x) -
                                      p.labels.begin());
    }
    case ParamKind::permutation: break;
  }
  throw Error(ErrorCode::invalid_argument, "rank() is undefined for permutation parameters");
}

json SearchSpace::config_to_json(const Configuration &config) const {
  json out = json::object();
  for (std::size_t i = 0; i < parameters_.size() && i < config.values.size(); ++i) {
    std::visit([&](const auto &v) { out[parameters_[i].name] = v; }, config.values[i]);
  }
  return out;
}

Configuration SearchSpace::config_from_json(const json &object) const {
  if (!object.is_object()) throw InvalidConfigError("configuration must be an object");
  for (auto it = object.begin(); it != object.end(); ++it)
    if (!index_of(it.key())) throw InvalidConfigError("unknown parameter '" + it.key() + "'");
  Configuration c;
  for (const auto &p : parameters_) {
    auto it = object.find(p.name);
    if (it == object.end()) throw InvalidConfigError("missing parameter '" + p.name + "'");
    switch (p.kind) {
      case ParamKind::ordinal:
        if (!it->is_number_integer())
          throw InvalidConfigError("parameter '" + p.name + "' expects an integer");
        c.values.emplace_back(it->get<std::int64_t>());
        break;
      case ParamKind::categorical:
        if (!it->is_string())
          throw InvalidConfigError("parameter '" + p.name + "' expects a label");
        c.values.emplace_back(it->get<std::string>());
        break;
      case ParamKind::permutation: {
        if (!it->is_array())
          throw InvalidConfigError("parameter '" + p.name + "' expects an index sequence");
        Permutation perm;
        for (const auto &e : *it) {
          if (!e.is_number_integer())
            throw InvalidConfigError("parameter '" + p.name + "' expects integers");
          perm.push_back(e.get<int>());
        }
        c.values.emplace_back(std::move(perm));
        break;
      }
    }
  }
  check_domain(c);
  return c;
}

std::string SearchSpace::describe(const Configuration &config) const {
  return config_to_json(config).dump();
}

json SearchSpace::to_json() const {
  json params = json::array();
  for (const auto &p : parameters_) {
    json j{{"name", p.name}, {"kind", std::string(to_string(p.kind))}};
    switch (p.kind) {
      case ParamKind::ordinal: j["values"] = p.values; break;
      case ParamKind::categorical: j["values"] = p.labels; break;
      case ParamKind::permutation: j["size"] = p.perm_size; break;
    }
    params.push_back(std::move(j));
  }
  json cons = json::array();
  for (const auto &c : constraints_) cons.push_back(c.source());
  return json{{"parameters", params}, {"known_constraints", cons}};
}

SearchSpace SearchSpace::from_json(const json &document) {
  try {
    std::vector<ParameterDef> params;
    for (const auto &j : document.at("parameters")) {
      auto kind = parse_kind(j.at("kind").get<std::string>());
      auto name = j.at("name").get<std::string>();
      switch (kind) {
        case ParamKind::ordinal:
          params.push_back(ParameterDef::ordinal(name, j.at("values").get<std::vector<std::int64_t>>()));
          break;
        case ParamKind::categorical:
          params.push_back(ParameterDef::categorical(name, j.at("values").get<std::vector<std::string>>()));
          break;
        case ParamKind::permutation:
          params.push_back(ParameterDef::permutation(name, j.at("size").get<int>()));
          break;
      }
    }
    std::vector<std::string> cons;
    if (document.contains("known_constraints"))
      cons = document.at("known_constraints").get<std::vector<std::string>>();
    return SearchSpace(std::move(params), cons);
  } catch (const json::exception &e) {
    malformed(std::string("search_space: ") + e.what());
  }
}

BigCount cardinality(const SearchSpace &space) {
  BigCount n = 1;
  for (const auto &p : space.parameters()) n *= p.domain_size();
  return n;
}

Verdict validate(const SearchSpace &space, const Configuration &config) {
  Verdict v;
  const auto &cons = space.constraints();
  for (std::size_t i = 0; i < cons.size(); ++i) {
    if (!cons[i].evaluate(config)) {
      v.valid = false;
      v.violated.push_back(static_cast<int>(i));
    }
  }
  return v;
}

Configuration sample_any(const SearchSpace &space, Rng &rng) {
  Configuration c;
  c.values.reserve(space.dimensions());
  for (const auto &p : space.parameters()) {
    switch (p.kind) {
      case ParamKind::ordinal: c.values.emplace_back(p.values[rng.index(p.values.size())]); break;
      case ParamKind::categorical: c.values.emplace_back(p.labels[rng.index(p.labels.size())]); break;
      case ParamKind::permutation: {
        Permutation perm(p.perm_size);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        c.values.emplace_back(std::move(perm));
        break;
      }
    }
  }
  return c;
}

std::vector<Configuration> sample_valid(const SearchSpace &space, std::uint64_t seed,
                                        std::size_t n, std::uint64_t budget_factor) {
  std::vector<Configuration> out;
  out.reserve(n);
  Rng rng(seed);
  const std::uint64_t budget = budget_factor * n;
  std::uint64_t draws = 0;
  while (out.size() < n) {
    if (draws++ >= budget)
      throw Error(ErrorCode::infeasible_space,
                  "rejection budget of " + std::to_string(budget) +
                      " draws exhausted; the known constraints admit (almost) no configurations");
    auto c = sample_any(space, rng);
    if (validate(space, c).valid) out.push_back(std::move(c));
  }
  return out;
}

Enumeration enumerate_valid(const SearchSpace &space, std::uint64_t cap) {
  Enumeration result;
  result.cardinality = cardinality(space);
  if (result.cardinality > cap)
    throw Error(ErrorCode::too_large, "search space cardinality " +
                                          result.cardinality.str() + " exceeds cap " +
                                          std::to_string(cap));
  const auto &params = space.parameters();
  const std::size_t d = params.size();

  // Odometer over per-parameter domains; the last parameter varies fastest.
  std::vector<std::size_t> digit(d, 0);
  std::vector<Permutation> perms(d);
  Configuration c;
  for (std::size_t i = 0; i < d; ++i) {
    const auto &p = params[i];
    switch (p.kind) {
      case ParamKind::ordinal: c.values.emplace_back(p.values[0]); break;
      case ParamKind::categorical: c.values.emplace_back(p.labels[0]); break;
      case ParamKind::permutation:
        perms[i].resize(p.perm_size);
        std::iota(perms[i].begin(), perms[i].end(), 0);
        c.values.emplace_back(perms[i]);
        break;
    }
  }
  for (;;) {
    if (validate(space, c).valid) result.configs.push_back(c);
    std::size_t i = d;
    for (; i-- > 0;) {
      const auto &p = params[i];
      bool carry = false;
      switch (p.kind) {
        case ParamKind::ordinal:
          if (++digit[i] == p.values.size()) digit[i] = 0, carry = true;
          c.values[i] = p.values[digit[i]];
          break;
        case ParamKind::categorical:
          if (++digit[i] == p.labels.size()) digit[i] = 0, carry = true;
          c.values[i] = p.labels[digit[i]];
          break;
        case ParamKind::permutation:
          carry = !std::next_permutation(perms[i].begin(), perms[i].end());
          c.values[i] = perms[i];
          break;
      }
      if (!carry) break;
    }
    if (i == static_cast<std::size_t>(-1)) break;
  }
  result.ratio = static_cast<double>(result.configs.size()) /
                 result.cardinality.convert_to<double>();
  return result;
}

std::vector<double> encode(const SearchSpace &space, const Configuration &config) {
  std::vector<double> out(space.encoded_width(), 0.0);
  const auto &params = space.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto &p = params[i];
    const std::size_t off = space.encoded_offset(i);
    switch (p.kind) {
      case ParamKind::ordinal: {
        const auto k = p.values.size();
        out[off] = k == 1 ? 0.0
                          : static_cast<double>(space.rank(i, config.values[i])) /
                                static_cast<double>(k - 1);
        break;
      }
      case ParamKind::categorical: out[off + space.rank(i, config.values[i])] = 1.0; break;
      case ParamKind::permutation: {
        // Coordinate e holds the normalized position of element e.
        const auto &perm = std::get<Permutation>(config.values[i]);
        const double denom = p.perm_size == 1 ? 1.0 : static_cast<double>(p.perm_size - 1);
        for (std::size_t pos = 0; pos < perm.size(); ++pos)
          out[off + perm[pos]] = p.perm_size == 1 ? 0.0 : static_cast<double>(pos) / denom;
        break;
      }
    }
  }
  return out;
}

double kendall_tau_distance(const Permutation &a, const Permutation &b) {
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  std::vector<std::size_t> pos_b(n);
  for (std::size_t i = 0; i < n; ++i) pos_b[b[i]] = i;
  std::size_t discordant = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (pos_b[a[i]] > pos_b[a[j]]) ++discordant;
  return static_cast<double>(discordant) / static_cast<double>(n * (n - 1) / 2);
}

double distance(const SearchSpace &space, const Configuration &a, const Configuration &b) {
  const auto &params = space.parameters();
  if (params.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto &p = params[i];
    switch (p.kind) {
      case ParamKind::ordinal: {
        const auto k = p.values.size();
        if (k > 1) {
          const double ra = static_cast<double>(space.rank(i, a.values[i]));
          const double rb = static_cast<double>(space.rank(i, b.values[i]));
          total += std::abs(ra - rb) / static_cast<double>(k - 1);
        }
        break;
      }
      case ParamKind::categorical:
        total += std::get<std::string>(a.values[i]) == std::get<std::string>(b.values[i]) ? 0.0 : 1.0;
        break;
      case ParamKind::permutation:
        total += kendall_tau_distance(std::get<Permutation>(a.values[i]),
                                      std::get<Permutation>(b.values[i]));
        break;
    }
  }
  return total / static_cast<double>(params.size());
}

std::vector<Configuration> neighbors(const SearchSpace &space, const Configuration &config) {
  std::vector<Configuration> out;
  const auto &params = space.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto &p = params[i];
    switch (p.kind) {
      case ParamKind::ordinal: {
        const auto r = space.rank(i, config.values[i]);
        for (int step : {-1, 1}) {
          const auto nr = static_cast<std::int64_t>(r) + step;
          if (nr < 0 || nr >= static_cast<std::int64_t>(p.values.size())) continue;
          auto c = config;
          c.values[i] = p.values[nr];
          out.push_back(std::move(c));
        }
        break;
      }
      case ParamKind::categorical:
        for (const auto &label : p.labels) {
          if (label == std::get<std::string>(config.values[i])) continue;
          auto c = config;
          c.values[i] = label;
          out.push_back(std::move(c));
        }
        break;
      case ParamKind::permutation:
        for (int pos = 0; pos + 1 < p.perm_size; ++pos) {
          auto c = config;
          auto &perm = std::get<Permutation>(c.values[i]);
          std::swap(perm[pos], perm[pos + 1]);
          out.push_back(std::move(c));
        }
        break;
    }
  }
  return out;
}

}  // namespace catbench::space
