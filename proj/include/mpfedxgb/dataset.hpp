#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mpfedxgb/common.hpp"
#include "mpfedxgb/matrix.hpp"
#include "mpfedxgb/params.hpp"

namespace mpfedxgb {

class DataError : public Error {
 public:
  using Error::Error;
};

// Raw CSV cells, header split off.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "?" || cell == "NA" || cell == "NaN" || cell == "nan";
}

inline double parse_number(const std::string& cell, std::size_t row, const std::string& col) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw DataError("row " + std::to_string(row) + ", column '" + col + "': not a number: '" +
                    cell + "'");
  }
}

}  // namespace detail

inline RawTable parse_csv(std::istream& in) {
  RawTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV");
  t.header = detail::split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != t.header.size()) {
      throw DataError("line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                      " fields, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline RawTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return parse_csv(in);
}

// Feature columns after encoding, with the original column each came from.
struct Dataset {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  std::vector<int> source;  // index into the original non-label columns
  std::vector<std::string> source_names;
  std::vector<double> labels;

  std::size_t rows() const { return cols.empty() ? labels.size() : cols[0].size(); }
};

// Rejects missing cells (listing the data rows, 1-based), one-hot encodes
// categorical columns in order of first appearance, maps labels to 0/1 when
// they are not numeric. With `label_optional` a table without the label
// column yields empty labels.
inline Dataset ingest(const RawTable& t, const std::string& label,
                      const std::vector<std::string>& categorical = {},
                      bool label_optional = false) {
  const auto lit = std::find(t.header.begin(), t.header.end(), label);
  if (lit == t.header.end() && !label_optional) {
    throw DataError("label column '" + label + "' not found");
  }
  const bool has_label = lit != t.header.end();
  const std::size_t lcol = static_cast<std::size_t>(lit - t.header.begin());
  std::set<std::string> cats(categorical.begin(), categorical.end());
  for (const auto& c : cats) {
    if (std::find(t.header.begin(), t.header.end(), c) == t.header.end()) {
      throw DataError("categorical column '" + c + "' not found");
    }
  }

  std::vector<std::size_t> missing;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (const auto& cell : t.rows[r]) {
      if (detail::is_missing(cell)) {
        missing.push_back(r + 1);
        break;
      }
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 50; ++i) {
      list += (i ? "," : "") + std::to_string(missing[i]);
    }
    if (missing.size() > 50) list += ",...";
    throw DataError("missing values in " + std::to_string(missing.size()) + " rows: " + list);
  }

  Dataset d;
  // labels
  bool numeric = true;
  for (const auto& row : t.rows) {
    if (!has_label) break;
    try {
      std::size_t used = 0;
      std::stod(row[lcol], &used);
      if (used != row[lcol].size()) numeric = false;
    } catch (const std::exception&) {
      numeric = false;
    }
  }
  if (has_label && numeric) {
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      d.labels.push_back(detail::parse_number(t.rows[r][lcol], r + 1, label));
    }
  } else if (has_label) {
    std::vector<std::string> levels;
    for (const auto& row : t.rows) {
      if (std::find(levels.begin(), levels.end(), row[lcol]) == levels.end()) levels.push_back(row[lcol]);
    }
    std::sort(levels.begin(), levels.end());
    if (levels.size() != 2) throw DataError("non-numeric label must have exactly two levels");
    for (const auto& row : t.rows) d.labels.push_back(row[lcol] == levels[1] ? 1.0 : 0.0);
  }

  int src = 0;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c == lcol) continue;
    d.source_names.push_back(t.header[c]);
    if (cats.count(t.header[c])) {
      std::vector<std::string> levels;
      for (const auto& row : t.rows) {
        if (std::find(levels.begin(), levels.end(), row[c]) == levels.end()) levels.push_back(row[c]);
      }
      for (const auto& lv : levels) {
        std::vector<double> col(t.rows.size());
        for (std::size_t r = 0; r < t.rows.size(); ++r) col[r] = t.rows[r][c] == lv ? 1.0 : 0.0;
        d.names.push_back(t.header[c] + "=" + lv);
        d.cols.push_back(std::move(col));
        d.source.push_back(src);
      }
    } else {
      std::vector<double> col(t.rows.size());
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        col[r] = detail::parse_number(t.rows[r][c], r + 1, t.header[c]);
      }
      d.names.push_back(t.header[c]);
      d.cols.push_back(std::move(col));
      d.source.push_back(src);
    }
    ++src;
  }
  return d;
}

struct MinMax {
  std::vector<double> lo, hi;
};

inline MinMax fit_minmax(const std::vector<std::vector<double>>& cols) {
  MinMax m;
  for (const auto& c : cols) {
    const auto [a, b] = std::minmax_element(c.begin(), c.end());
    m.lo.push_back(c.empty() ? 0.0 : *a);
    m.hi.push_back(c.empty() ? 0.0 : *b);
  }
  return m;
}

// Constant columns map to 0.
inline void apply_minmax(std::vector<std::vector<double>>& cols, const MinMax& m) {
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const double span = m.hi[j] - m.lo[j];
    for (double& v : cols[j]) v = span > 0 ? (v - m.lo[j]) / span : 0.0;
  }
}

// Largest-remainder apportionment of J columns over the fractions, with at
// least one column per party. Returns the party (1-based) of each column in
// contiguous blocks.
inline std::vector<int> fractional_partition(int J, const std::vector<double>& fractions) {
  const int M = static_cast<int>(fractions.size());
  if (M < 2) throw TopologyError("a partition needs at least 2 parties");
  if (J < M) throw ConfigError("fewer columns (" + std::to_string(J) + ") than parties");
  double total = 0;
  for (double f : fractions) {
    if (!(f > 0)) throw ConfigError("partition fractions must be positive");
    total += f;
  }
  std::vector<int> count(M, 1);
  int left = J - M;
  std::vector<double> exact(M);
  for (int m = 0; m < M; ++m) exact[m] = fractions[m] / total * J;
  // top up towards the exact share, then by largest remainder
  for (int m = 0; m < M && left > 0; ++m) {
    const int want = static_cast<int>(std::floor(exact[m]));
    const int add = std::min(left, std::max(0, want - count[m]));
    count[m] += add;
    left -= add;
  }
  std::vector<int> order(M);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return exact[a] - count[a] > exact[b] - count[b];
  });
  for (int i = 0; left > 0; i = (i + 1) % M, --left) ++count[order[i]];
  std::vector<int> out;
  for (int m = 0; m < M; ++m) out.insert(out.end(), count[m], m + 1);
  return out;
}

// Party assignment of encoded columns: every column goes with its source
// column. `holders[j]` lists all parties holding column j; the lowest index
// is the split owner and the others keep it out of split scanning.
struct Partition {
  int parties = 0;
  std::vector<std::vector<int>> holders;  // by encoded column
  std::vector<int> owner;                  // by encoded column

  std::vector<int> owned_columns(int m) const {
    std::vector<int> out;
    for (std::size_t j = 0; j < owner.size(); ++j) {
      if (owner[j] == m) out.push_back(static_cast<int>(j));
    }
    return out;
  }
  std::vector<int> feature_counts() const {
    std::vector<int> c(parties, 0);
    for (int o : owner) ++c[o - 1];
    return c;
  }
};

inline Partition partition_by_fraction(const Dataset& d, const std::vector<double>& fractions) {
  const auto by_source = fractional_partition(static_cast<int>(d.source_names.size()), fractions);
  Partition p;
  p.parties = static_cast<int>(fractions.size());
  for (int src : d.source) {
    p.owner.push_back(by_source[src]);
    p.holders.push_back({by_source[src]});
  }
  return p;
}

// map: party -> source column names; a column listed for several parties
// is held by all of them.
inline Partition partition_by_map(const Dataset& d, int parties,
                                  const std::map<int, std::vector<std::string>>& map) {
  std::vector<std::set<int>> src_holders(d.source_names.size());
  for (const auto& [m, names] : map) {
    if (m < 1 || m > parties) throw TopologyError("feature map names party " + std::to_string(m));
    for (const auto& n : names) {
      const auto it = std::find(d.source_names.begin(), d.source_names.end(), n);
      if (it == d.source_names.end()) throw ConfigError("feature map names unknown column '" + n + "'");
      src_holders[it - d.source_names.begin()].insert(m);
    }
  }
  for (std::size_t s = 0; s < src_holders.size(); ++s) {
    if (src_holders[s].empty()) {
      throw ConfigError("column '" + d.source_names[s] + "' is not assigned to any party");
    }
  }
  Partition p;
  p.parties = parties;
  for (int src : d.source) {
    p.holders.push_back(std::vector<int>(src_holders[src].begin(), src_holders[src].end()));
    p.owner.push_back(*src_holders[src].begin());
  }
  for (int m = 1; m <= parties; ++m) {
    if (p.owned_columns(m).empty()) {
      throw ConfigError(party_name(static_cast<PartyId>(m)) + " owns no split feature");
    }
  }
  return p;
}

// Split-owned columns of party m, restricted to `rows`.
inline LocalMatrix local_block(const Dataset& d, const Partition& p, int m,
                               const std::vector<std::size_t>& rows) {
  LocalMatrix X;
  X.rows = rows.size();
  for (int j : p.owned_columns(m)) {
    std::vector<double> c(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) c[i] = d.cols[j][rows[i]];
    X.cols.push_back(std::move(c));
    X.names.push_back(d.names[j]);
  }
  return X;
}

// Per-class shuffle, then the first round(n_c * test_fraction) of each
// class go to the test set. Indices are returned sorted.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<double>& labels, double test_fraction, std::uint64_t seed) {
  if (test_fraction < 0 || test_fraction >= 1) throw ConfigError("test_fraction must be in [0, 1)");
  std::map<double, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Rng rng(derive_seed(seed, kSeedSplit));
  std::vector<std::size_t> train, test;
  for (auto& [c, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    const auto nt = static_cast<std::size_t>(std::llround(idx.size() * test_fraction));
    test.insert(test.end(), idx.begin(), idx.begin() + nt);
    train.insert(train.end(), idx.begin() + nt, idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

// Labels from a noisy linear model with one interaction over uniform
// features: thresholded at 0, or the raw value with `regression`.
inline Dataset make_synthetic(std::size_t N, int J, std::uint64_t seed, bool regression = false) {
  Rng rng(derive_seed(seed, kSeedData));
  Dataset d;
  std::vector<double> w(J);
  for (int j = 0; j < J; ++j) w[j] = rng.normal(0.0, 2.0);
  for (int j = 0; j < J; ++j) {
    std::vector<double> c(N);
    for (auto& v : c) v = rng.uniform(0.0, 1.0);
    d.cols.push_back(std::move(c));
    d.names.push_back("x" + std::to_string(j));
    d.source.push_back(j);
    d.source_names.push_back(d.names.back());
  }
  for (std::size_t i = 0; i < N; ++i) {
    double z = 0;
    for (int j = 0; j < J; ++j) z += w[j] * (d.cols[j][i] - 0.5);
    z += 2.0 * (d.cols[0][i] > 0.5 ? 1.0 : -1.0) * (J > 1 && d.cols[1][i] > 0.5 ? 1.0 : -1.0);
    z += rng.normal(0.0, 0.5);
    d.labels.push_back(regression ? z : (z > 0 ? 1.0 : 0.0));
  }
  return d;
}

inline void write_csv(const std::string& path, const Dataset& d, const std::string& label = "label") {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out.precision(17);
  for (const auto& n : d.names) out << n << ',';
  out << label << '\n';
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (const auto& c : d.cols) out << c[i] << ',';
    out << d.labels[i] << '\n';
  }
}

}  // namespace mpfedxgb
