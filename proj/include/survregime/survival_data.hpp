#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace survregime {

/// Right-censored single-decision sample: covariates X (n x p), treatment A,
/// observed time min(T, C) and event indicator I{T <= C}. Validated on
/// construction and immutable afterwards.
class SurvivalSample {
 public:
  SurvivalSample(Eigen::MatrixXd covariates, std::vector<int> treatment,
                 std::vector<double> time, std::vector<int> event,
                 std::vector<std::string> covariate_names = {});

  std::size_t size() const { return time_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(covariates_.cols()); }

  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const std::vector<int>& treatment() const { return treatment_; }
  const std::vector<double>& time() const { return time_; }
  const std::vector<int>& event() const { return event_; }
  const std::vector<std::string>& covariate_names() const { return names_; }

  /// Non-fatal findings from validation (e.g. deaths at time 0).
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Rows in the given order; indices may repeat (bootstrap resampling).
  SurvivalSample subset(std::span<const std::size_t> rows) const;

 private:
  Eigen::MatrixXd covariates_;
  std::vector<int> treatment_;
  std::vector<double> time_;
  std::vector<int> event_;
  std::vector<std::string> names_;
  std::vector<std::string> warnings_;
};

/// Two decision points: baseline (X0, A0) and interim time s where subjects
/// still alive and uncensored receive (X1, A1). Interim fields are NaN / -1
/// for rows with time <= s.
class TwoStageSample {
 public:
  TwoStageSample(Eigen::MatrixXd baseline_covariates, std::vector<int> stage0_treatment,
                 double interim_time, Eigen::MatrixXd interim_covariates,
                 std::vector<int> stage1_treatment, std::vector<double> time,
                 std::vector<int> event, std::vector<std::string> warnings = {});

  std::size_t size() const { return time_.size(); }
  std::size_t baseline_dim() const { return static_cast<std::size_t>(x0_.cols()); }
  std::size_t interim_dim() const { return static_cast<std::size_t>(x1_.cols()); }

  const Eigen::MatrixXd& baseline_covariates() const { return x0_; }
  const std::vector<int>& stage0_treatment() const { return a0_; }
  double interim_time() const { return s_; }
  const std::vector<bool>& alive_uncensored_at_s() const { return alive_; }
  const Eigen::MatrixXd& interim_covariates() const { return x1_; }
  const std::vector<int>& stage1_treatment() const { return a1_; }
  const std::vector<double>& time() const { return time_; }
  const std::vector<int>& event() const { return event_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  TwoStageSample subset(std::span<const std::size_t> rows) const;

 private:
  Eigen::MatrixXd x0_;
  std::vector<int> a0_;
  double s_;
  std::vector<bool> alive_;
  Eigen::MatrixXd x1_;
  std::vector<int> a1_;
  std::vector<double> time_;
  std::vector<int> event_;
  std::vector<std::string> warnings_;
};

/// Column names used to locate fields in a CSV header.
struct CsvSchema {
  std::string time = "time";
  std::string event = "event";
  std::string treatment = "treatment";
  std::vector<std::string> covariates;
};

struct TwoStageCsvSchema {
  std::string time = "time";
  std::string event = "event";
  std::string stage0_treatment = "a0";
  std::vector<std::string> baseline_covariates;
  std::string stage1_treatment = "a1";
  std::vector<std::string> interim_covariates;
};

SurvivalSample load_survival_csv(const std::filesystem::path& path, const CsvSchema& schema);

TwoStageSample load_two_stage_csv(const std::filesystem::path& path, double interim_time,
                                  const TwoStageCsvSchema& schema);

/// Writes numbers in shortest round-trip form, so reloading is bit-exact.
void write_survival_csv(const std::filesystem::path& path, const SurvivalSample& sample,
                        const CsvSchema& schema);

void write_two_stage_csv(const std::filesystem::path& path, const TwoStageSample& sample,
                         const TwoStageCsvSchema& schema);

/// Reads a single numeric column by header name, e.g. a known propensity.
std::vector<double> load_csv_column(const std::filesystem::path& path, const std::string& column);

}  // namespace survregime
