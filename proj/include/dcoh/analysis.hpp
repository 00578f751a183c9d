#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcoh/corpus.hpp"
#include "dcoh/swapgen.hpp"
#include "json.hpp"

namespace dcoh {

struct TurnFeatureVector {
  std::size_t overlap_entities = 0;  // candidate mentions whose head occurs in the context
  std::size_t novel_entities = 0;    // the remaining candidate mentions
  std::vector<int> da_indicators;    // one per tagset label: 1 iff the candidate uses it
};

TurnFeatureVector extract_turn_features(std::span<const Turn> context, const Turn& candidate,
                                        const Tagset& tagset);

struct OlsFit {
  std::vector<std::string> names;  // "(intercept)" first
  std::vector<double> coefficients;
  std::vector<double> std_errors;
  std::vector<double> t_stats;
  std::vector<double> p_values;
  std::vector<double> residuals;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  std::size_t n = 0;
  std::size_t p = 0;  // predictors, excluding the intercept
};

/// 1 - (1 - r2)(n - 1)/(n - p - 1).
double adjusted_r2(double r2, std::size_t n, std::size_t p);

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
double t_two_sided_p(double t, double df);

/// "**" for p < .01, "*" for .01 <= p <= .05, else "".
std::string significance_stars(double p);

/// Least squares with an added intercept column, solved by Householder QR.
/// X is n x p (predictors only). Throws NumericError when n <= p + 1 or the
/// augmented design is rank deficient.
OlsFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               std::vector<std::string> names = {});

enum class FeatureGroup { Entities, Das, All };
std::string to_string(FeatureGroup g);

struct GroupFit {
  FeatureGroup group;
  OlsFit fit;
  std::vector<std::string> dropped;  // constant or collinear predictors removed
};

/// One regression per feature group predicting per-candidate mean ratings.
/// Predictors that are constant or linearly dependent on earlier columns
/// are dropped before fitting; a design with no usable predictors gives an
/// intercept-only fit (R^2 = 0).
std::vector<GroupFit> mcc_report(const std::vector<RatedInstance>& data, const Tagset& tagset);

/// TSV: group, name, coefficient, se, t, p, stars.
std::string coefficients_tsv(const std::vector<GroupFit>& fits);
nlohmann::json mcc_summary_json(const std::vector<GroupFit>& fits);

struct GroupStat {
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation
  std::size_t count = 0;
};

/// Mean and SD of candidate mean ratings per provenance. Throws DataError
/// when a provenance group is empty.
std::map<Provenance, GroupStat> group_stats(const std::vector<RatedInstance>& data);
nlohmann::json group_stats_json(const std::map<Provenance, GroupStat>& stats);

}  // namespace dcoh
