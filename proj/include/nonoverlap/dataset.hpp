#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nonoverlap/errors.hpp"

namespace nonoverlap {

/// Observed data Z = (X, A, Y): covariates, binary treatment, outcome in [0, 1].
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd A;
  Eigen::VectorXd Y;
  std::vector<std::string> covariate_names;

  Eigen::Index n() const { return A.size(); }
  Eigen::Index p() const { return X.cols(); }

  /// Throws DataError on a contract violation; returns advisory warnings.
  std::vector<std::string> validate() const {
    const auto rows = A.size();
    if (Y.size() != rows || X.rows() != rows) {
      std::ostringstream os;
      os << "dataset shape mismatch: X has " << X.rows() << " rows, A " << A.size()
         << ", Y " << Y.size();
      throw DataError(os.str());
    }
    if (!covariate_names.empty() && static_cast<Eigen::Index>(covariate_names.size()) != X.cols())
      throw DataError("covariate_names length does not match the number of covariate columns");
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (!(A[i] == 0.0 || A[i] == 1.0)) {
        std::ostringstream os;
        os << "treatment must be binary (0/1); row " << i << " has " << A[i];
        throw DataError(os.str());
      }
      if (!std::isfinite(Y[i]) || Y[i] < 0.0 || Y[i] > 1.0) {
        std::ostringstream os;
        os << "outcome must lie in [0, 1]; row " << i << " has " << Y[i]
           << " (rescale a bounded outcome to [0, 1] before analysis)";
        throw DataError(os.str());
      }
      for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (!std::isfinite(X(i, j))) {
          std::ostringstream os;
          os << "non-finite covariate at row " << i << ", column " << j;
          throw DataError(os.str());
        }
      }
    }
    std::vector<std::string> warnings;
    if (rows < 2 * X.cols()) {
      std::ostringstream os;
      os << "n = " << rows << " is below 2p = " << 2 * X.cols()
         << "; nuisance regressions may be unstable";
      warnings.push_back(os.str());
    }
    return warnings;
  }
};

}  // namespace nonoverlap
