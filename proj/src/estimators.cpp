#include <cmath>
#include <limits>

#include "mest/error.hpp"
#include "mest/estimators.hpp"

namespace mest {

namespace {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double cell(const DataUnit& unit, const std::string& col) {
  const auto& v = unit.rows.numeric(col);
  if (v.size() != 1) throw ArgumentError("row-wise estimator received a multi-row unit");
  return v.front();
}

Vector design_row(const DataUnit& unit, const ModelSpec& model) {
  return design_matrix(unit, model.covariates, model.intercept).row(0).transpose();
}

double subset_mask(const DataUnit& unit, const ModelSpec& model) {
  if (!model.subset) return 1.0;
  return cell(unit, model.subset->column) == model.subset->value ? 1.0 : 0.0;
}

void require_binary(double value, const std::string& col) {
  if (value != 0.0 && value != 1.0) throw SchemaError(col, "expected values 0 or 1");
}

void require_model(const ModelSpec& model) {
  if (model.response.empty()) throw ArgumentError("model has no response column");
  if (model.n_coef() < 1) throw ArgumentError("model has no coefficients");
}

}  // namespace

EstimatorSpec mean_spec(const std::string& y_col) {
  EstimatorSpec s;
  s.name = "mean";
  s.p = 1;
  s.outer_build = [y_col](const DataUnit& unit, const Args&) -> PsiFn {
    const double y = cell(unit, y_col);
    return [y](const Vector& theta, const Args&) {
      Vector out(1);
      out << y - theta[0];
      return out;
    };
  };
  return s;
}

EstimatorSpec moments_spec(const std::string& y_col) {
  EstimatorSpec s;
  s.name = "moments";
  s.p = 2;
  s.outer_build = [y_col](const DataUnit& unit, const Args&) -> PsiFn {
    const double y = cell(unit, y_col);
    return [y](const Vector& theta, const Args&) {
      const double d = y - theta[0];
      Vector out(2);
      out << d, d * d - theta[1];
      return out;
    };
  };
  return s;
}

EstimatorSpec ratio_spec(const std::string& y1_col, const std::string& y2_col) {
  EstimatorSpec s;
  s.name = "ratio";
  s.p = 3;
  s.outer_build = [y1_col, y2_col](const DataUnit& unit, const Args&) -> PsiFn {
    const double y1 = cell(unit, y1_col);
    const double y2 = cell(unit, y2_col);
    return [y1, y2](const Vector& theta, const Args&) {
      Vector out(3);
      out << y1 - theta[0], y2 - theta[1], theta[0] - theta[2] * theta[1];
      return out;
    };
  };
  return s;
}

EstimatorSpec delta_spec(const std::string& y_col) {
  EstimatorSpec s;
  s.name = "delta";
  s.p = 4;
  s.outer_build = [y_col](const DataUnit& unit, const Args&) -> PsiFn {
    const double y = cell(unit, y_col);
    return [y](const Vector& theta, const Args&) {
      const double d = y - theta[0];
      Vector out(4);
      out << d, d * d - theta[1], std::sqrt(theta[1]) - theta[2], std::log(theta[1]) - theta[3];
      return out;
    };
  };
  return s;
}

EstimatorSpec linear_score_spec(const ModelSpec& model) {
  require_model(model);
  EstimatorSpec s;
  s.name = "linear";
  s.p = model.n_coef();
  s.outer_build = [model](const DataUnit& unit, const Args&) -> PsiFn {
    const Vector x = design_row(unit, model);
    const double y = cell(unit, model.response);
    const double mask = subset_mask(unit, model);
    return [x, y, mask](const Vector& theta, const Args&) -> Vector {
      return x * ((y - x.dot(theta)) * mask);
    };
  };
  return s;
}

EstimatorSpec logistic_score_spec(const ModelSpec& model) {
  require_model(model);
  EstimatorSpec s;
  s.name = "logistic";
  s.p = model.n_coef();
  s.outer_build = [model](const DataUnit& unit, const Args&) -> PsiFn {
    const Vector x = design_row(unit, model);
    const double y = cell(unit, model.response);
    require_binary(y, model.response);
    const double mask = subset_mask(unit, model);
    return [x, y, mask](const Vector& theta, const Args&) -> Vector {
      return x * ((y - expit(x.dot(theta))) * mask);
    };
  };
  return s;
}

EstimatorSpec score_spec(const ModelSpec& model) {
  return model.kind == ModelKind::linear ? linear_score_spec(model) : logistic_score_spec(model);
}

Matrix exchangeable_correlation(Index n, double alpha) {
  Matrix R = Matrix::Constant(n, n, alpha);
  R.diagonal().setOnes();
  return R;
}

EstimatorSpec gee_spec(const GeeConfig& cfg) {
  require_model(cfg.model);
  if (!(cfg.alpha > -1.0 && cfg.alpha < 1.0)) throw ConfigError("alpha must lie in (-1, 1)");
  if (!(cfg.phi > 0.0) || !std::isfinite(cfg.phi)) throw ConfigError("phi must be positive");
  if (cfg.model.subset) throw ConfigError("row subsets are not supported for GEE");

  EstimatorSpec s;
  s.name = "gee";
  s.p = cfg.model.n_coef();
  s.shape = UnitShape::whole_block;
  s.inner_args = {{"alpha", cfg.alpha}, {"phi", cfg.phi}};

  const double alpha = cfg.alpha;
  s.check = [alpha](const UnitPartition& partition) {
    std::size_t largest = 0;
    for (const auto& u : partition.units) largest = std::max(largest, u.rows.n_rows());
    // Exchangeable eigenvalues are 1 - alpha and 1 + (n - 1) alpha.
    if (!(1.0 + (static_cast<double>(largest) - 1.0) * alpha > 0.0)) {
      throw ConfigError("exchangeable correlation with alpha = " + std::to_string(alpha) +
                        " is not positive definite for clusters of size " +
                        std::to_string(largest));
    }
  };

  const ModelSpec model = cfg.model;
  s.outer_build = [model](const DataUnit& unit, const Args&) -> PsiFn {
    const Matrix X = design_matrix(unit, model.covariates, model.intercept);
    const auto& ycol = unit.rows.numeric(model.response);
    const Vector Y = Eigen::Map<const Vector>(ycol.data(), static_cast<Index>(ycol.size()));
    const bool logistic = model.kind == ModelKind::logistic;
    if (logistic) {
      for (double y : ycol) require_binary(y, model.response);
    }
    return [X, Y, logistic](const Vector& theta, const Args& inner) -> Vector {
      const double alpha = arg_real(inner, "alpha");
      const double phi = arg_real(inner, "phi");
      const Index n = X.rows();
      const Vector eta = X * theta;
      Vector mu(n), dmu(n), var(n);
      for (Index r = 0; r < n; ++r) {
        if (logistic) {
          mu[r] = expit(eta[r]);
          dmu[r] = mu[r] * (1.0 - mu[r]);
          var[r] = mu[r] * (1.0 - mu[r]);
        } else {
          mu[r] = eta[r];
          dmu[r] = 1.0;
          var[r] = 1.0;
        }
      }
      const Matrix D = dmu.asDiagonal() * X;
      const Vector w_half = var.cwiseSqrt();
      const Matrix V =
          phi * (w_half.asDiagonal() * exchangeable_correlation(n, alpha) * w_half.asDiagonal());
      Eigen::LLT<Matrix> llt(V);
      if (llt.info() != Eigen::Success) {
        return Vector::Constant(X.cols(), std::numeric_limits<double>::quiet_NaN());
      }
      return D.transpose() * llt.solve(Y - mu);
    };
  };
  return s;
}

DoublyRobustLayout doubly_robust_layout(const ModelSpec& propensity, const ModelSpec& outcome0,
                                        const ModelSpec& outcome1) {
  DoublyRobustLayout l;
  l.propensity = {0, propensity.n_coef()};
  l.outcome0 = {l.propensity.length, outcome0.n_coef()};
  l.outcome1 = {l.outcome0.offset + l.outcome0.length, outcome1.n_coef()};
  l.delta = l.outcome1.offset + l.outcome1.length;
  l.p = l.delta + 1;
  return l;
}

EstimatorSpec doubly_robust_spec(const ModelSpec& propensity, const ModelSpec& outcome0,
                                 const ModelSpec& outcome1) {
  require_model(propensity);
  require_model(outcome0);
  require_model(outcome1);
  if (propensity.kind != ModelKind::logistic) {
    throw ArgumentError("propensity model must be logistic");
  }
  if (outcome0.kind != ModelKind::linear || outcome1.kind != ModelKind::linear) {
    throw ArgumentError("outcome models must be linear");
  }
  if (outcome0.response != outcome1.response) {
    throw ArgumentError("outcome models must share the response column");
  }
  const std::string z_col = propensity.response;
  const std::string y_col = outcome0.response;

  ModelSpec m0 = outcome0;
  ModelSpec m1 = outcome1;
  if (!m0.subset) m0.subset = RowSubset{z_col, 0.0};
  if (!m1.subset) m1.subset = RowSubset{z_col, 1.0};

  const DoublyRobustLayout layout = doubly_robust_layout(propensity, m0, m1);

  EstimatorSpec contrast;
  contrast.name = "dr_contrast";
  contrast.p = 1;
  contrast.theta_dim = layout.p;
  contrast.outer_build = [=](const DataUnit& unit, const Args&) -> PsiFn {
    const double z = cell(unit, z_col);
    const double y = cell(unit, y_col);
    const Vector xe = design_row(unit, propensity);
    const Vector x0 = design_row(unit, m0);
    const Vector x1 = design_row(unit, m1);
    return [=](const Vector& theta, const Args&) {
      const double e = expit(xe.dot(theta.segment(layout.propensity.offset, layout.propensity.length)));
      const double mu0 = x0.dot(theta.segment(layout.outcome0.offset, layout.outcome0.length));
      const double mu1 = x1.dot(theta.segment(layout.outcome1.offset, layout.outcome1.length));
      const double rd = (z * y - (z - e) * mu1) / e - ((1.0 - z) * y - (z - e) * mu0) / (1.0 - e);
      Vector out(1);
      out << rd - theta[layout.delta];
      return out;
    };
  };

  EstimatorSpec s = stack(
      {
          StackBlock{logistic_score_spec(propensity), layout.propensity, false},
          StackBlock{linear_score_spec(m0), layout.outcome0, false},
          StackBlock{linear_score_spec(m1), layout.outcome1, false},
          StackBlock{contrast, {layout.delta, 1}, true},
      },
      "doubly_robust");

  auto nested_check = s.check;
  s.check = [nested_check, z_col](const UnitPartition& partition) {
    bool any0 = false, any1 = false;
    for (const auto& u : partition.units) {
      for (double z : u.rows.numeric(z_col)) {
        require_binary(z, z_col);
        (z == 1.0 ? any1 : any0) = true;
      }
    }
    if (!any0 || !any1) {
      throw ArgumentError("treatment column '" + z_col + "' has a single arm; both Z = 0 and "
                          "Z = 1 rows are required");
    }
    if (nested_check) nested_check(partition);
  };

  s.diagnose = [propensity, layout](const UnitPartition& partition, const Vector& theta) {
    std::vector<std::string> warnings;
    const Vector coef = theta.segment(layout.propensity.offset, layout.propensity.length);
    for (const auto& u : partition.units) {
      const Matrix X = design_matrix(u, propensity.covariates, propensity.intercept);
      for (Index r = 0; r < X.rows(); ++r) {
        const double e = expit(X.row(r).dot(coef));
        if (e < 1e-8 || e > 1.0 - 1e-8) {
          const std::size_t row =
              u.source_rows.empty() ? static_cast<std::size_t>(r) : u.source_rows.at(r);
          warnings.push_back("propensity score " + std::to_string(e) + " at row " +
                             std::to_string(row) + " is numerically 0 or 1 (weight explosion)");
        }
      }
    }
    return warnings;
  };
  return s;
}

}  // namespace mest
