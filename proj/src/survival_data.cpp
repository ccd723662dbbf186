#include "survregime/survival_data.hpp"

#include "survregime/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace survregime {

namespace {

std::string row_label(std::size_t row) { return "row " + std::to_string(row); }

void check_binary(int value, const char* what, std::size_t row) {
  if (value != 0 && value != 1) {
    throw Error(ErrorCode::validation,
                std::string(what) + " must be 0 or 1 (" + row_label(row + 1) + ")");
  }
}

void check_outcome(const std::vector<double>& time, const std::vector<int>& event,
                   std::vector<std::string>& warnings) {
  if (time.size() != event.size()) {
    throw Error(ErrorCode::validation, "time and event lengths differ");
  }
  if (time.size() < 2) {
    throw Error(ErrorCode::validation, "sample needs at least 2 subjects");
  }
  bool any_event = false;
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (!std::isfinite(time[i]) || time[i] < 0.0) {
      throw Error(ErrorCode::validation, "time must be finite and >= 0 (" + row_label(i + 1) + ")");
    }
    check_binary(event[i], "event", i);
    any_event = any_event || event[i] == 1;
    if (time[i] == 0.0 && event[i] == 1) {
      warnings.push_back("death at time 0 (" + row_label(i + 1) + ")");
    }
  }
  if (!any_event) {
    throw Error(ErrorCode::validation, "sample has no events");
  }
}

// Minimal RFC-4180-free CSV: comma separated, no quoting, header required.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return j;
    }
    throw Error(ErrorCode::schema, "missing column \"" + name + "\"");
  }
};

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::schema, "cannot open " + path.string());
  }
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!have_header) {
      if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
          static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
        line.erase(0, 3);
      }
      if (trim(line).empty()) continue;
      table.header = split(line);
      have_header = true;
      continue;
    }
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (fields.size() != table.header.size()) {
      throw Error(ErrorCode::parse, "expected " + std::to_string(table.header.size()) +
                                        " fields, got " + std::to_string(fields.size()) + " (" +
                                        row_label(table.rows.size() + 1) + ")");
    }
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) {
    throw Error(ErrorCode::schema, "empty file " + path.string());
  }
  return table;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw Error(ErrorCode::parse, "non-numeric value \"" + cell + "\" in column \"" + column +
                                      "\" (" + row_label(row + 1) + ")");
  }
  return value;
}

int parse_binary(const std::string& cell, std::size_t row, const std::string& column) {
  double v = parse_number(cell, row, column);
  if (v != 0.0 && v != 1.0) {
    throw Error(ErrorCode::validation,
                column + " must be 0 or 1, got " + cell + " (" + row_label(row + 1) + ")");
  }
  return static_cast<int>(v);
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

SurvivalSample::SurvivalSample(Eigen::MatrixXd covariates, std::vector<int> treatment,
                               std::vector<double> time, std::vector<int> event,
                               std::vector<std::string> covariate_names)
    : covariates_(std::move(covariates)),
      treatment_(std::move(treatment)),
      time_(std::move(time)),
      event_(std::move(event)),
      names_(std::move(covariate_names)) {
  check_outcome(time_, event_, warnings_);
  const auto n = time_.size();
  if (treatment_.size() != n || static_cast<std::size_t>(covariates_.rows()) != n) {
    throw Error(ErrorCode::validation, "covariates/treatment/time lengths differ");
  }
  for (std::size_t i = 0; i < n; ++i) {
    check_binary(treatment_[i], "treatment", i);
    for (Eigen::Index j = 0; j < covariates_.cols(); ++j) {
      if (!std::isfinite(covariates_(static_cast<Eigen::Index>(i), j))) {
        throw Error(ErrorCode::validation, "non-finite covariate (" + row_label(i + 1) + ")");
      }
    }
  }
  if (names_.empty()) {
    for (Eigen::Index j = 0; j < covariates_.cols(); ++j) names_.push_back("x" + std::to_string(j + 1));
  } else if (names_.size() != dim()) {
    throw Error(ErrorCode::validation, "covariate name count does not match columns");
  }
}

SurvivalSample SurvivalSample::subset(std::span<const std::size_t> rows) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), covariates_.cols());
  std::vector<int> a(rows.size());
  std::vector<double> t(rows.size());
  std::vector<int> d(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = rows[k];
    x.row(static_cast<Eigen::Index>(k)) = covariates_.row(static_cast<Eigen::Index>(i));
    a[k] = treatment_[i];
    t[k] = time_[i];
    d[k] = event_[i];
  }
  return SurvivalSample(std::move(x), std::move(a), std::move(t), std::move(d), names_);
}

TwoStageSample::TwoStageSample(Eigen::MatrixXd baseline_covariates, std::vector<int> stage0_treatment,
                               double interim_time, Eigen::MatrixXd interim_covariates,
                               std::vector<int> stage1_treatment, std::vector<double> time,
                               std::vector<int> event, std::vector<std::string> warnings)
    : x0_(std::move(baseline_covariates)),
      a0_(std::move(stage0_treatment)),
      s_(interim_time),
      x1_(std::move(interim_covariates)),
      a1_(std::move(stage1_treatment)),
      time_(std::move(time)),
      event_(std::move(event)),
      warnings_(std::move(warnings)) {
  check_outcome(time_, event_, warnings_);
  const auto n = time_.size();
  if (!(s_ > 0.0) || !std::isfinite(s_)) {
    throw Error(ErrorCode::validation, "interim time must be positive");
  }
  if (static_cast<std::size_t>(x0_.rows()) != n || a0_.size() != n ||
      static_cast<std::size_t>(x1_.rows()) != n || a1_.size() != n) {
    throw Error(ErrorCode::validation, "two-stage field lengths differ");
  }
  alive_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    check_binary(a0_[i], "stage-0 treatment", i);
    if (!x0_.row(r).allFinite()) {
      throw Error(ErrorCode::validation, "non-finite baseline covariate (" + row_label(i + 1) + ")");
    }
    alive_[i] = time_[i] > s_;
    if (alive_[i]) {
      if (!x1_.row(r).allFinite() || (a1_[i] != 0 && a1_[i] != 1)) {
        throw Error(ErrorCode::validation,
                    "missing stage-1 data for subject alive at interim time (" + row_label(i + 1) + ")");
      }
    } else {
      x1_.row(r).setConstant(std::numeric_limits<double>::quiet_NaN());
      a1_[i] = -1;
    }
  }
}

TwoStageSample TwoStageSample::subset(std::span<const std::size_t> rows) const {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x0(m, x0_.cols());
  Eigen::MatrixXd x1(m, x1_.cols());
  std::vector<int> a0(rows.size()), a1(rows.size()), d(rows.size());
  std::vector<double> t(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = rows[k];
    x0.row(static_cast<Eigen::Index>(k)) = x0_.row(static_cast<Eigen::Index>(i));
    x1.row(static_cast<Eigen::Index>(k)) = x1_.row(static_cast<Eigen::Index>(i));
    a0[k] = a0_[i];
    a1[k] = a1_[i];
    t[k] = time_[i];
    d[k] = event_[i];
  }
  return TwoStageSample(std::move(x0), std::move(a0), s_, std::move(x1), std::move(a1), std::move(t),
                        std::move(d));
}

SurvivalSample load_survival_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  const CsvTable table = read_csv(path);
  const auto c_time = table.column(schema.time);
  const auto c_event = table.column(schema.event);
  const auto c_trt = table.column(schema.treatment);
  std::vector<std::size_t> c_cov;
  for (const auto& name : schema.covariates) c_cov.push_back(table.column(name));

  const auto n = table.rows.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c_cov.size()));
  std::vector<int> a(n), d(n);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    t[i] = parse_number(row[c_time], i, schema.time);
    d[i] = parse_binary(row[c_event], i, schema.event);
    a[i] = parse_binary(row[c_trt], i, schema.treatment);
    for (std::size_t j = 0; j < c_cov.size(); ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          parse_number(row[c_cov[j]], i, schema.covariates[j]);
    }
  }
  return SurvivalSample(std::move(x), std::move(a), std::move(t), std::move(d), schema.covariates);
}

TwoStageSample load_two_stage_csv(const std::filesystem::path& path, double interim_time,
                                  const TwoStageCsvSchema& schema) {
  if (!(interim_time > 0.0)) {
    throw Error(ErrorCode::validation, "interim time must be positive");
  }
  const CsvTable table = read_csv(path);
  const auto c_time = table.column(schema.time);
  const auto c_event = table.column(schema.event);
  const auto c_a0 = table.column(schema.stage0_treatment);
  const auto c_a1 = table.column(schema.stage1_treatment);
  std::vector<std::size_t> c_x0, c_x1;
  for (const auto& name : schema.baseline_covariates) c_x0.push_back(table.column(name));
  for (const auto& name : schema.interim_covariates) c_x1.push_back(table.column(name));

  const auto n = table.rows.size();
  const auto rows = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd x0(rows, static_cast<Eigen::Index>(c_x0.size()));
  Eigen::MatrixXd x1(rows, static_cast<Eigen::Index>(c_x1.size()));
  std::vector<int> a0(n), a1(n, -1), d(n);
  std::vector<double> t(n);
  std::vector<std::string> ignored;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    const auto r = static_cast<Eigen::Index>(i);
    t[i] = parse_number(row[c_time], i, schema.time);
    d[i] = parse_binary(row[c_event], i, schema.event);
    a0[i] = parse_binary(row[c_a0], i, schema.stage0_treatment);
    for (std::size_t j = 0; j < c_x0.size(); ++j) {
      x0(r, static_cast<Eigen::Index>(j)) = parse_number(row[c_x0[j]], i, schema.baseline_covariates[j]);
    }
    const bool alive = t[i] > interim_time;
    bool any_present = !row[c_a1].empty();
    for (auto c : c_x1) any_present = any_present || !row[c].empty();
    if (!alive) {
      if (any_present) ignored.push_back("stage-1 fields ignored for " + row_label(i + 1));
      x1.row(r).setConstant(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    if (row[c_a1].empty()) {
      throw Error(ErrorCode::validation, "missing " + schema.stage1_treatment + " for subject alive at "
                                         "interim time (" + row_label(i + 1) + ")");
    }
    a1[i] = parse_binary(row[c_a1], i, schema.stage1_treatment);
    for (std::size_t j = 0; j < c_x1.size(); ++j) {
      const auto& cell = row[c_x1[j]];
      if (cell.empty()) {
        throw Error(ErrorCode::validation, "missing " + schema.interim_covariates[j] +
                                               " for subject alive at interim time (" +
                                               row_label(i + 1) + ")");
      }
      x1(r, static_cast<Eigen::Index>(j)) = parse_number(cell, i, schema.interim_covariates[j]);
    }
  }
  return TwoStageSample(std::move(x0), std::move(a0), interim_time, std::move(x1), std::move(a1),
                        std::move(t), std::move(d), std::move(ignored));
}

void write_survival_csv(const std::filesystem::path& path, const SurvivalSample& sample,
                        const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::schema, "cannot write " + path.string());
  std::vector<std::string> names = schema.covariates;
  if (names.empty()) names = sample.covariate_names();
  out << schema.time << ',' << schema.event << ',' << schema.treatment;
  for (const auto& nm : names) out << ',' << nm;
  out << '\n';
  const auto& x = sample.covariates();
  for (std::size_t i = 0; i < sample.size(); ++i) {
    out << format_number(sample.time()[i]) << ',' << sample.event()[i] << ',' << sample.treatment()[i];
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out << ',' << format_number(x(static_cast<Eigen::Index>(i), j));
    }
    out << '\n';
  }
}

void write_two_stage_csv(const std::filesystem::path& path, const TwoStageSample& sample,
                         const TwoStageCsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::schema, "cannot write " + path.string());
  out << schema.time << ',' << schema.event << ',' << schema.stage0_treatment;
  for (const auto& nm : schema.baseline_covariates) out << ',' << nm;
  out << ',' << schema.stage1_treatment;
  for (const auto& nm : schema.interim_covariates) out << ',' << nm;
  out << '\n';
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const bool alive = sample.alive_uncensored_at_s()[i];
    out << format_number(sample.time()[i]) << ',' << sample.event()[i] << ','
        << sample.stage0_treatment()[i];
    for (Eigen::Index j = 0; j < sample.baseline_covariates().cols(); ++j) {
      out << ',' << format_number(sample.baseline_covariates()(r, j));
    }
    out << ',';
    if (alive) out << sample.stage1_treatment()[i];
    for (Eigen::Index j = 0; j < sample.interim_covariates().cols(); ++j) {
      out << ',';
      if (alive) out << format_number(sample.interim_covariates()(r, j));
    }
    out << '\n';
  }
}

std::vector<double> load_csv_column(const std::filesystem::path& path, const std::string& column) {
  const CsvTable table = read_csv(path);
  const auto c = table.column(column);
  std::vector<double> out(table.rows.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = parse_number(table.rows[i][c], i, column);
  return out;
}

}  // namespace survregime
