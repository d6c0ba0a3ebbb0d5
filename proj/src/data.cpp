#include "rex/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace rex {

namespace {

using nlohmann::json;

ColumnKind kind_from_string(const std::string& s) {
  if (s == "continuous") return ColumnKind::continuous;
  if (s == "categorical") return ColumnKind::categorical;
  throw SchemaMismatch("unknown column kind '" + s + "'");
}

// One CSV record. Supports quoted fields ("" escapes a quote); embedded
// newlines are not supported.
std::vector<std::string> split_csv_line(const std::string& line,
                                        std::size_t row_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) {
    throw ParseError("unterminated quote in row " + std::to_string(row_no));
  }
  fields.push_back(cur);
  return fields;
}

double parse_number(const std::string& token, std::size_t row_no,
                    const std::string& col_name) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || begin == end) {
    throw ParseError("row " + std::to_string(row_no) + ", column '" +
                     col_name + "': cannot parse '" + token + "' as a number");
  }
  return value;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

DatasetSchema DatasetSchema::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaMismatch(std::string("invalid schema JSON: ") + e.what());
  }
  DatasetSchema schema;
  if (!j.contains("columns") || !j["columns"].is_array()) {
    throw SchemaMismatch("schema requires a 'columns' array");
  }
  for (const auto& c : j["columns"]) {
    DatasetSchema::Column col;
    col.name = c.at("name").get<std::string>();
    col.kind = kind_from_string(c.at("kind").get<std::string>());
    schema.columns.push_back(std::move(col));
  }
  if (j.contains("label") && !j["label"].is_null()) {
    schema.label = j["label"].get<std::string>();
    bool found = false;
    for (const auto& c : schema.columns) found |= c.name == *schema.label;
    if (!found) {
      throw SchemaMismatch("label column '" + *schema.label +
                           "' not present in columns");
    }
  }
  return schema;
}

DatasetSchema DatasetSchema::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open schema file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

LabeledDataset load_csv(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open data file '" + path + "'");

  std::size_t label_idx = schema.columns.size();
  if (schema.label) {
    for (std::size_t i = 0; i < schema.columns.size(); ++i) {
      if (schema.columns[i].name == *schema.label) label_idx = i;
    }
  }

  LabeledDataset ds;
  const std::size_t n_cols = schema.columns.size();
  const std::size_t d = schema.label ? n_cols - 1 : n_cols;
  for (std::size_t i = 0; i < n_cols; ++i) {
    if (i == label_idx) continue;
    ds.feature_names.push_back(schema.columns[i].name);
    ds.kinds.push_back(schema.columns[i].kind);
  }
  ds.categories.resize(d);
  if (schema.label) {
    ds.label_name = *schema.label;
    ds.label_is_class = schema.columns[label_idx].kind == ColumnKind::categorical;
  }

  std::vector<std::unordered_map<std::string, double>> codes(d);
  std::unordered_map<std::string, double> label_codes;
  std::vector<double> flat;
  std::vector<double> labels;

  std::string line;
  std::size_t row_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line, row_no);
    if (first) {
      first = false;
      // Optional header: skipped when the first record repeats the schema
      // column names verbatim.
      bool is_header = fields.size() == n_cols;
      for (std::size_t i = 0; is_header && i < n_cols; ++i) {
        is_header = fields[i] == schema.columns[i].name;
      }
      if (is_header) continue;
    }
    if (fields.size() != n_cols) {
      throw SchemaMismatch("row " + std::to_string(row_no) + " has " +
                           std::to_string(fields.size()) +
                           " fields, schema expects " +
                           std::to_string(n_cols));
    }
    std::size_t out_col = 0;
    for (std::size_t i = 0; i < n_cols; ++i) {
      const auto& col = schema.columns[i];
      const std::string& token = fields[i];
      if (token.empty()) {
        throw ParseError("row " + std::to_string(row_no) + ", column '" +
                         col.name + "': missing value");
      }
      if (i == label_idx) {
        if (ds.label_is_class) {
          auto [it, inserted] = label_codes.try_emplace(
              token, static_cast<double>(label_codes.size()));
          if (inserted) ds.label_categories.push_back(token);
          labels.push_back(it->second);
        } else {
          const double v = parse_number(token, row_no, col.name);
          if (!std::isfinite(v)) {
            throw ParseError("row " + std::to_string(row_no) + ", column '" +
                             col.name + "': non-finite value");
          }
          labels.push_back(v);
        }
        continue;
      }
      if (col.kind == ColumnKind::categorical) {
        auto [it, inserted] = codes[out_col].try_emplace(
            token, static_cast<double>(codes[out_col].size()));
        if (inserted) ds.categories[out_col].push_back(token);
        flat.push_back(it->second);
      } else {
        const double v = parse_number(token, row_no, col.name);
        if (!std::isfinite(v)) {
          throw ParseError("row " + std::to_string(row_no) + ", column '" +
                           col.name + "': non-finite value");
        }
        flat.push_back(v);
      }
      ++out_col;
    }
  }

  ds.features.d = d;
  ds.features.n = d == 0 ? 0 : flat.size() / d;
  ds.features.data = std::move(flat);
  ds.labels = std::move(labels);
  return ds;
}

void save_csv(const std::string& path, const LabeledDataset& ds) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  for (std::size_t j = 0; j < ds.feature_names.size(); ++j) {
    if (j) out << ',';
    out << ds.feature_names[j];
  }
  if (ds.has_labels()) {
    if (!ds.feature_names.empty()) out << ',';
    out << (ds.label_name.empty() ? std::string("label") : ds.label_name);
  }
  out << '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t j = 0; j < ds.features.d; ++j) {
      if (j) out << ',';
      const double v = ds.features.at(i, j);
      if (ds.kinds[j] == ColumnKind::categorical) {
        out << ds.categories[j][static_cast<std::size_t>(v)];
      } else {
        out << format_double(v);
      }
    }
    if (ds.has_labels()) {
      if (ds.features.d) out << ',';
      if (ds.label_is_class) {
        out << ds.label_categories[static_cast<std::size_t>(ds.labels[i])];
      } else {
        out << format_double(ds.labels[i]);
      }
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// BackgroundData
// ---------------------------------------------------------------------------

BackgroundData BackgroundData::from_dataset(const LabeledDataset& ds) {
  BackgroundData bg;
  bg.rows = ds.features;
  bg.kinds = ds.kinds;
  for (double v : bg.rows.data) {
    if (!std::isfinite(v)) {
      throw ParseError("background data contains a non-finite entry");
    }
  }
  return bg;
}

BackgroundData BackgroundData::from_rows(std::vector<std::vector<double>> rows,
                                         std::vector<ColumnKind> kinds) {
  if (rows.empty()) throw EmptyBackground("background requires n >= 1 rows");
  BackgroundData bg;
  bg.rows = RowMatrix(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != bg.rows.d) {
      throw DimensionMismatch("background rows have inconsistent widths");
    }
    for (std::size_t j = 0; j < bg.rows.d; ++j) {
      if (!std::isfinite(rows[i][j])) {
        throw ParseError("background data contains a non-finite entry");
      }
      bg.rows.at(i, j) = rows[i][j];
    }
  }
  bg.kinds = kinds.empty()
                 ? std::vector<ColumnKind>(bg.rows.d, ColumnKind::continuous)
                 : std::move(kinds);
  return bg;
}

// ---------------------------------------------------------------------------
// Marginals
// ---------------------------------------------------------------------------

double quantile_type7(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw EmptyDataset("quantile of an empty sample");
  if (sorted.size() == 1) return sorted[0];
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted[sorted.size() - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<FeatureMarginal> empirical_marginals(const BackgroundData& bg,
                                                 int n_bins) {
  if (bg.n() == 0) throw EmptyDataset("empirical_marginals on empty data");
  std::vector<FeatureMarginal> out(bg.rows.d);
  for (std::size_t j = 0; j < bg.rows.d; ++j) {
    FeatureMarginal& m = out[j];
    m.kind = bg.kinds[j];
    std::vector<double> col(bg.n());
    for (std::size_t i = 0; i < bg.n(); ++i) col[i] = bg.rows.at(i, j);
    if (m.kind == ColumnKind::categorical) {
      std::vector<double> seen;
      std::vector<std::size_t> counts;
      for (double v : col) {
        auto it = std::find(seen.begin(), seen.end(), v);
        if (it == seen.end()) {
          seen.push_back(v);
          counts.push_back(1);
        } else {
          ++counts[static_cast<std::size_t>(it - seen.begin())];
        }
      }
      m.values = std::move(seen);
      for (std::size_t c : counts) {
        m.freqs.push_back(static_cast<double>(c) /
                          static_cast<double>(bg.n()));
      }
    } else {
      std::sort(col.begin(), col.end());
      m.lo = col.front();
      m.hi = col.back();
      for (int b = 1; b < n_bins; ++b) {
        m.bin_edges.push_back(
            quantile_type7(col, static_cast<double>(b) / n_bins));
      }
      m.sorted = std::move(col);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic Gaussian-linear data
// ---------------------------------------------------------------------------

double SynthOracle::extension_value(std::span<const double> x,
                                    const FeatureSubset& s) const {
  const std::vector<double> filled =
      gaussian_conditional_fill(mean, cov, x, s.members());
  double v = 0.0;
  for (std::size_t i = 0; i < beta.size(); ++i) v += beta[i] * filled[i];
  return v;
}

std::vector<double> SynthOracle::dataset_loss_shapley() const {
  for (std::size_t i = 0; i < mean.size(); ++i) {
    for (std::size_t j = 0; j < mean.size(); ++j) {
      if (i != j && cov(i, j) != 0.0) {
        throw PreconditionViolation(
            "analytic Shapley values require a diagonal covariance");
      }
    }
  }
  std::vector<double> phi(beta.size());
  for (std::size_t i = 0; i < beta.size(); ++i) {
    phi[i] = beta[i] * beta[i] * cov(i, i);
  }
  return phi;
}

SynthResult synth_gaussian_linear(const std::vector<double>& mean,
                                  const Mat& cov,
                                  const std::vector<double>& beta,
                                  double noise_std, std::size_t n,
                                  std::uint64_t seed) {
  const std::size_t d = mean.size();
  if (cov.rows() != d || cov.cols() != d || beta.size() != d) {
    throw DimensionMismatch("synth_gaussian_linear dimension mismatch");
  }
  auto l = cholesky(cov);
  if (!l) throw NotPositiveDefinite("covariance is not positive definite");

  SynthResult out;
  out.oracle = SynthOracle{mean, cov, beta, noise_std};
  LabeledDataset& ds = out.data;
  ds.features = RowMatrix(n, d);
  ds.labels.resize(n);
  ds.kinds.assign(d, ColumnKind::continuous);
  ds.categories.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    ds.feature_names.push_back("x" + std::to_string(j));
  }
  ds.label_name = "y";

  std::vector<double> z(d);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(row_seed(seed, i));
    for (std::size_t j = 0; j < d; ++j) z[j] = rng.normal();
    double y = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double v = mean[j];
      for (std::size_t k = 0; k <= j; ++k) v += (*l)(j, k) * z[k];
      ds.features.at(i, j) = v;
      y += beta[j] * v;
    }
    if (noise_std > 0.0) y += noise_std * rng.normal();
    ds.labels[i] = y;
  }
  return out;
}

}  // namespace rex
