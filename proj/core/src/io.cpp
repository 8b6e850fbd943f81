#include "sieveate/io.hpp"

#include "sieveate/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace sieveate::io {
namespace {

bool parse_double(const std::string& text, double& out) {
  std::size_t b = 0, e = text.size();
  while (b < e && (text[b] == ' ' || text[b] == '\t')) ++b;
  while (e > b && (text[e - 1] == ' ' || text[e - 1] == '\t')) --e;
  if (b == e) return false;
  const char* first = text.data() + b;
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, text.data() + e, out);
  return ec == std::errc() && ptr == text.data() + e && std::isfinite(out);
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false, field_started = false, any = false;
  char c;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field += c;
        }
        break;
      case ',': end_field(); break;
      case '\r':
        if (in.peek() == '\n') in.get(c);
        end_record();
        any = false;
        break;
      case '\n':
        end_record();
        any = false;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) fail(ErrorCode::Schema, "csv: unterminated quoted field");
  if (any) end_record();
  // UTF-8 byte-order mark on the first header cell
  if (!records.empty() && !records[0].empty() && records[0][0].rfind("\xEF\xBB\xBF", 0) == 0) {
    records[0][0].erase(0, 3);
  }
  return records;
}

Dataset read_csv(std::istream& in, const ColumnMap& columns) {
  const auto records = parse_csv(in);
  if (records.empty()) fail(ErrorCode::Schema, "csv: missing header row");
  const auto& header = records[0];
  auto column_index = [&](const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return j;
    }
    fail(ErrorCode::Schema, "csv: column '" + name + "' not found in header");
  };
  require(!columns.outcome.empty() && !columns.treatment.empty() && !columns.covariates.empty(),
          "csv: outcome, treatment and at least one covariate column must be named");
  const auto y_col = column_index(columns.outcome);
  const auto d_col = column_index(columns.treatment);
  std::vector<std::size_t> x_cols;
  for (const auto& name : columns.covariates) x_cols.push_back(column_index(name));

  std::vector<double> ys, ds, xs;
  std::vector<std::string> rejected;
  const auto d = x_cols.size();
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && rec[0].empty()) continue;  // blank line
    const auto row_no = std::to_string(r);
    auto cell = [&](std::size_t j) -> const std::string* {
      return j < rec.size() ? &rec[j] : nullptr;
    };
    double y = 0.0, t = 0.0;
    std::vector<double> x(d);
    bool ok = cell(y_col) && parse_double(*cell(y_col), y);
    ok = ok && cell(d_col) && parse_double(*cell(d_col), t);
    for (std::size_t j = 0; ok && j < d; ++j) ok = cell(x_cols[j]) && parse_double(*cell(x_cols[j]), x[j]);
    if (!ok) {
      rejected.push_back(row_no);
      continue;
    }
    if (t != 0.0 && t != 1.0) {
      fail(ErrorCode::Validation, "csv: treatment value '" + *cell(d_col) + "' at row " + row_no +
                                      " is not 0 or 1");
    }
    ys.push_back(y);
    ds.push_back(t);
    xs.insert(xs.end(), x.begin(), x.end());
  }

  const auto n = static_cast<Eigen::Index>(ys.size());
  if (n < static_cast<Eigen::Index>(d) + 2) {
    std::string msg = "csv: only " + std::to_string(n) + " valid rows, need at least " +
                      std::to_string(d + 2);
    if (!rejected.empty()) {
      msg += "; rejected rows:";
      for (const auto& r : rejected) msg += " " + r;
    }
    fail(ErrorCode::InsufficientData, msg);
  }
  Dataset data;
  data.outcomes = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  data.treatments = Eigen::Map<Eigen::VectorXd>(ds.data(), n);
  data.covariates =
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          xs.data(), n, static_cast<Eigen::Index>(d));
  data.validate();
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const ColumnMap& columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "csv: cannot open '" + path.string() + "'");
  return read_csv(in, columns);
}

void write_csv(const Dataset& data, std::ostream& out, const ColumnMap& columns) {
  const auto d = data.dim();
  ColumnMap names = columns;
  if (names.outcome.empty()) names.outcome = "y";
  if (names.treatment.empty()) names.treatment = "d";
  if (names.covariates.empty()) {
    for (Eigen::Index j = 0; j < d; ++j) names.covariates.push_back("x" + std::to_string(j + 1));
  }
  require(static_cast<Eigen::Index>(names.covariates.size()) == d,
          "write_csv: covariate name count differs from d");
  out << quote_if_needed(names.outcome) << ',' << quote_if_needed(names.treatment);
  for (const auto& c : names.covariates) out << ',' << quote_if_needed(c);
  out << '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out << fmt17(data.outcomes[i]) << ',' << (data.treatments[i] == 1.0 ? "1" : "0");
    for (Eigen::Index j = 0; j < d; ++j) out << ',' << fmt17(data.covariates(i, j));
    out << '\n';
  }
}

std::vector<int> parse_k_range(const std::string& text) {
  std::vector<int> out;
  auto to_int = [&](const std::string& s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 1) {
      fail(ErrorCode::InvalidArgument, "invalid truncation candidate '" + s + "'");
    }
    return v;
  };
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const int lo = to_int(text.substr(0, dots));
    const int hi = to_int(text.substr(dots + 2));
    require(lo <= hi, "k range '" + text + "' is empty");
    for (int k = lo; k <= hi; ++k) out.push_back(k);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(item));
  require(!out.empty(), "empty truncation candidate list");
  return out;
}

}  // namespace sieveate::io
