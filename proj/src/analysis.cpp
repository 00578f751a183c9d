#include "dcoh/analysis.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "dcoh/common.hpp"

namespace dcoh {

namespace {

// Relative pivot size below which a design column counts as dependent. The
// Eigen default (machine epsilon) lets exact duplicates through on rounding.
constexpr double kRankTolerance = 1e-10;

}  // namespace

TurnFeatureVector extract_turn_features(std::span<const Turn> context, const Turn& candidate,
                                        const Tagset& tagset) {
  std::set<std::string> seen;
  for (const auto& t : context)
    for (const auto& s : t.segments)
      for (const auto& m : s.entities) seen.insert(lowercase(m.head));
  TurnFeatureVector f;
  std::set<std::string> das;
  for (const auto& s : candidate.segments) {
    das.insert(s.da);
    for (const auto& m : s.entities) {
      if (seen.count(lowercase(m.head))) ++f.overlap_entities;
      else ++f.novel_entities;
    }
  }
  for (const auto& label : tagset.labels) f.da_indicators.push_back(das.count(label) ? 1 : 0);
  return f;
}

double adjusted_r2(double r2, std::size_t n, std::size_t p) {
  if (n <= p + 1) throw NumericError("adjusted_r2: need n > p + 1");
  return 1.0 - (1.0 - r2) * static_cast<double>(n - 1) / static_cast<double>(n - p - 1);
}

double t_two_sided_p(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

std::string significance_stars(double p) {
  if (std::isnan(p)) return "";
  if (p < 0.01) return "**";
  if (p <= 0.05) return "*";
  return "";
}

OlsFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               std::vector<std::string> names) {
  const auto n = static_cast<std::size_t>(X.rows());
  const auto p = static_cast<std::size_t>(X.cols());
  if (static_cast<std::size_t>(y.size()) != n)
    throw std::invalid_argument("fit_ols: X and y row counts differ");
  if (n <= p + 1)
    throw NumericError("fit_ols: insufficient observations (n=" + std::to_string(n) +
                       ", p=" + std::to_string(p) + ")");
  if (names.empty())
    for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  if (names.size() != p) throw std::invalid_argument("fit_ols: name count mismatch");

  Eigen::MatrixXd A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p + 1));
  A.col(0).setOnes();
  A.rightCols(static_cast<Eigen::Index>(p)) = X;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_qr(A);
  rank_qr.setThreshold(kRankTolerance);
  if (static_cast<std::size_t>(rank_qr.rank()) < p + 1)
    throw NumericError("fit_ols: design matrix is rank deficient (rank " +
                       std::to_string(rank_qr.rank()) + " < " + std::to_string(p + 1) + ")");

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd resid = y - A * beta;
  const double ssr = resid.squaredNorm();
  const double mean = y.mean();
  const double sst = (y.array() - mean).square().sum();

  OlsFit f;
  f.n = n;
  f.p = p;
  f.names.push_back("(intercept)");
  for (auto& s : names) f.names.push_back(std::move(s));
  f.r2 = sst > 0.0 ? 1.0 - ssr / sst : 0.0;
  f.adj_r2 = adjusted_r2(f.r2, n, p);
  f.residuals.assign(resid.data(), resid.data() + resid.size());

  const auto k = static_cast<Eigen::Index>(p + 1);
  const Eigen::MatrixXd R =
      qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv =
      R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const double df = static_cast<double>(n - p - 1);
  const double sigma2 = ssr / df;
  const Eigen::MatrixXd cov = sigma2 * (Rinv * Rinv.transpose());
  for (Eigen::Index j = 0; j < k; ++j) {
    const double b = beta(j);
    const double se = std::sqrt(std::max(0.0, cov(j, j)));
    double t;
    if (se > 0.0) t = b / se;
    else t = b == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), b);
    f.coefficients.push_back(b);
    f.std_errors.push_back(se);
    f.t_stats.push_back(t);
    f.p_values.push_back(t_two_sided_p(t, df));
  }
  return f;
}

std::string to_string(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::Entities: return "entities";
    case FeatureGroup::Das: return "das";
    case FeatureGroup::All: return "all";
  }
  return "?";
}

namespace {

// Greedily keeps columns that raise the rank of [1 | kept].
std::vector<std::size_t> independent_columns(const Eigen::MatrixXd& X) {
  std::vector<std::size_t> kept;
  Eigen::MatrixXd A(X.rows(), 1);
  A.col(0).setOnes();
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    Eigen::MatrixXd trial(X.rows(), A.cols() + 1);
    trial << A, X.col(j);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() == trial.cols()) {
      A = std::move(trial);
      kept.push_back(static_cast<std::size_t>(j));
    }
  }
  return kept;
}

}  // namespace

std::vector<GroupFit> mcc_report(const std::vector<RatedInstance>& data, const Tagset& tagset) {
  std::vector<TurnFeatureVector> feats;
  std::vector<double> y;
  for (const auto& r : data)
    for (const auto& c : r.candidates) {
      feats.push_back(extract_turn_features(r.context, c.turn, tagset));
      y.push_back(c.mean_rating);
    }
  if (feats.empty()) throw DataError("mcc_report: no rated candidates");
  const auto n = static_cast<Eigen::Index>(feats.size());
  const Eigen::VectorXd Y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);

  std::vector<GroupFit> out;
  for (auto g : {FeatureGroup::Entities, FeatureGroup::Das, FeatureGroup::All}) {
    std::vector<std::string> names;
    if (g != FeatureGroup::Das) names = {"overlapping_entities", "novel_entities"};
    if (g != FeatureGroup::Entities)
      for (const auto& l : tagset.labels) names.push_back("da:" + l);
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(names.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& f = feats[static_cast<std::size_t>(i)];
      Eigen::Index col = 0;
      if (g != FeatureGroup::Das) {
        X(i, col++) = static_cast<double>(f.overlap_entities);
        X(i, col++) = static_cast<double>(f.novel_entities);
      }
      if (g != FeatureGroup::Entities)
        for (int v : f.da_indicators) X(i, col++) = v;
    }
    const auto kept = independent_columns(X);
    GroupFit gf{g, {}, {}};
    Eigen::MatrixXd Xk(n, static_cast<Eigen::Index>(kept.size()));
    std::vector<std::string> kept_names;
    std::set<std::size_t> keep_set(kept.begin(), kept.end());
    for (std::size_t j = 0; j < kept.size(); ++j) {
      Xk.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(kept[j]));
      kept_names.push_back(names[kept[j]]);
    }
    for (std::size_t j = 0; j < names.size(); ++j)
      if (!keep_set.count(j)) gf.dropped.push_back(names[j]);
    gf.fit = fit_ols(Xk, Y, std::move(kept_names));
    out.push_back(std::move(gf));
  }
  return out;
}

std::string coefficients_tsv(const std::vector<GroupFit>& fits) {
  std::ostringstream out;
  out.precision(10);
  out << "group\tname\tcoefficient\tse\tt\tp\tstars\n";
  for (const auto& g : fits)
    for (std::size_t j = 0; j < g.fit.names.size(); ++j)
      out << to_string(g.group) << '\t' << g.fit.names[j] << '\t' << g.fit.coefficients[j]
          << '\t' << g.fit.std_errors[j] << '\t' << g.fit.t_stats[j] << '\t'
          << g.fit.p_values[j] << '\t' << significance_stars(g.fit.p_values[j]) << '\n';
  return out.str();
}

nlohmann::json mcc_summary_json(const std::vector<GroupFit>& fits) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& g : fits)
    j[to_string(g.group)] = {{"r2", g.fit.r2},
                             {"adj_r2", g.fit.adj_r2},
                             {"mcc_r2", std::sqrt(std::max(0.0, g.fit.r2))},
                             {"mcc_adj_r2", std::sqrt(std::max(0.0, g.fit.adj_r2))},
                             {"n", g.fit.n},
                             {"p", g.fit.p},
                             {"dropped", g.dropped}};
  return j;
}

std::map<Provenance, GroupStat> group_stats(const std::vector<RatedInstance>& data) {
  std::map<Provenance, std::vector<double>> values;
  for (const auto& r : data)
    for (const auto& c : r.candidates) values[c.provenance].push_back(c.mean_rating);
  std::map<Provenance, GroupStat> out;
  for (auto p : {Provenance::Original, Provenance::Internal, Provenance::External}) {
    const auto& v = values[p];
    if (v.empty()) throw DataError("group_stats: no " + to_string(p) + " candidates");
    GroupStat s;
    s.count = v.size();
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    for (double x : v) s.sd += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(s.sd / static_cast<double>(v.size()));
    out[p] = s;
  }
  return out;
}

nlohmann::json group_stats_json(const std::map<Provenance, GroupStat>& stats) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [p, s] : stats)
    j[to_string(p)] = {{"mean", s.mean}, {"sd", s.sd}, {"count", s.count}};
  return j;
}

}  // namespace dcoh
