#include "rebal/ols.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <utility>

#include "rebal/errors.hpp"

namespace rebal {

Index RegressionResult::coefficient(const std::string& name) const {
  for (std::size_t k = 0; k < term_names.size(); ++k) {
    if (term_names[k] == name) return static_cast<Index>(k);
  }
  throw Error("no coefficient named '" + name + "'");
}

RegressionResult ols_regress(const Matrix& design, const Vector& response,
                             std::vector<std::string> term_names) {
  const Index n = design.rows();
  const Index k = design.cols();
  if (response.size() != n) {
    throw DimensionError("response length does not match design rows");
  }
  if (term_names.size() != static_cast<std::size_t>(k)) {
    throw DimensionError("one term name per design column required");
  }
  if (n <= k) {
    throw Error("not enough observations for the requested model");
  }

  const Matrix gram = design.transpose() * design;
  Eigen::LDLT<Matrix> solver(gram);
  if (solver.info() != Eigen::Success ||
      solver.vectorD().minCoeff() <=
          1e-12 * std::max(1.0, solver.vectorD().maxCoeff())) {
    throw Error("rank-deficient design matrix");
  }
  const Vector beta = solver.solve(design.transpose() * response);

  const Vector residuals = response - design * beta;
  const double ssr = residuals.squaredNorm();
  const double mean = response.mean();
  const double sst = (response.array() - mean).matrix().squaredNorm();
  const double dof = static_cast<double>(n - k);
  const double sigma2 = ssr / dof;

  const Matrix covariance = sigma2 * solver.solve(Matrix::Identity(k, k));

  RegressionResult result;
  result.term_names = std::move(term_names);
  result.coefficients = beta;
  result.standard_errors = covariance.diagonal().cwiseSqrt();
  result.t_statistics =
      beta.cwiseQuotient(result.standard_errors.cwiseMax(1e-300));
  result.p_values.resize(k);
  const boost::math::students_t_distribution<double> student(dof);
  for (Index c = 0; c < k; ++c) {
    const double t = std::abs(result.t_statistics(c));
    double p = 2.0 * boost::math::cdf(boost::math::complement(student, t));
    result.p_values(c) = std::max(p, 1e-300);
  }
  result.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
  result.adjusted_r_squared =
      1.0 - (1.0 - result.r_squared) * static_cast<double>(n - 1) / dof;
  result.f_statistic =
      k > 1 ? (result.r_squared / static_cast<double>(k - 1)) /
                  ((1.0 - result.r_squared) / dof)
            : 0.0;
  result.rmse = std::sqrt(sigma2);
  result.n_observations = n;
  return result;
}

std::string format_regression(const RegressionResult& result) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "" << std::right << std::setw(14)
      << "Estimate" << std::setw(14) << "SE" << std::setw(12) << "tStat"
      << std::setw(14) << "pValue" << "\n";
  for (std::size_t c = 0; c < result.term_names.size(); ++c) {
    const Index i = static_cast<Index>(c);
    out << std::left << std::setw(14) << result.term_names[c] << std::right
        << std::setw(14) << std::setprecision(5) << result.coefficients(i)
        << std::setw(14) << result.standard_errors(i) << std::setw(12)
        << result.t_statistics(i);
    if (result.p_values(i) < 1e-100) {
      out << std::setw(14) << "<1e-100";
    } else {
      out << std::setw(14) << result.p_values(i);
    }
    out << "\n";
  }
  out << "Observations: " << result.n_observations
      << ", RMSE: " << std::setprecision(4) << result.rmse << "\n";
  out << "R-squared: " << std::setprecision(4) << result.r_squared
      << ", Adjusted R-squared: " << result.adjusted_r_squared
      << ", F-statistic: " << result.f_statistic << "\n";
  return out.str();
}

}  // namespace rebal
