#include "oulab/ou_model.hpp"

#include "oulab/linalg.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace oulab {

const char *toString(ErrorCode code) {
  switch (code) {
  case ErrorCode::NotSPD: return "NotSPD";
  case ErrorCode::NotStable: return "NotStable";
  case ErrorCode::DimensionMismatch: return "DimensionMismatch";
  case ErrorCode::NonFinite: return "NonFinite";
  case ErrorCode::NonPositiveTime: return "NonPositiveTime";
  case ErrorCode::StepUnderflow: return "StepUnderflow";
  case ErrorCode::EmptyPath: return "EmptyPath";
  case ErrorCode::BadOrder: return "BadOrder";
  case ErrorCode::TooLong: return "TooLong";
  case ErrorCode::BadSplit: return "BadSplit";
  case ErrorCode::ZeroPoint: return "ZeroPoint";
  case ErrorCode::BracketFail: return "BracketFail";
  case ErrorCode::AlphaTooSmall: return "AlphaTooSmall";
  case ErrorCode::EtaZero: return "EtaZero";
  case ErrorCode::Coincident: return "Coincident";
  case ErrorCode::TailNotConverged: return "TailNotConverged";
  case ErrorCode::RateTooLarge: return "RateTooLarge";
  case ErrorCode::QuadratureBudgetExceeded: return "QuadratureBudgetExceeded";
  case ErrorCode::CostGuard: return "CostGuard";
  case ErrorCode::InvalidArgument: return "InvalidArgument";
  case ErrorCode::Io: return "Io";
  case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

double OUModel::lyapunovResidual() const {
  return (b_ * qinf_ + qinf_ * b_.transpose() + q_).cwiseAbs().maxCoeff();
}

OUModel buildModel(const Matrix &q, const Matrix &b,
                   const ModelTolerances &tol) {
  if (q.rows() == 0 || q.rows() != q.cols() || b.rows() != b.cols() ||
      q.rows() != b.rows()) {
    throw Error(ErrorCode::DimensionMismatch,
                "Q and B must be square matrices of the same size");
  }
  if (!allFinite(q) || !allFinite(b)) {
    throw Error(ErrorCode::NonFinite, "model matrices contain non-finite entries");
  }
  const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  if (linalg::symmetryDefect(q) > tol.symmetry * scale) {
    throw Error(ErrorCode::NotSPD, "Q is not symmetric");
  }
  const Matrix qs = 0.5 * (q + q.transpose());
  Eigen::LLT<Matrix> qllt(qs);
  if (qllt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotSPD, "Q is not positive definite");
  }
  const double abscissa = linalg::spectralAbscissa(b);
  if (!(abscissa < 0)) {
    throw Error(ErrorCode::NotStable,
                "B has an eigenvalue with non-negative real part");
  }

  OUModel m;
  m.q_ = qs;
  m.b_ = b;
  m.spectralAbscissa_ = abscissa;
  m.qinf_ = linalg::solveLyapunov(b, qs);
  Eigen::LLT<Matrix> illt(m.qinf_);
  if (illt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotSPD, "Qinf is not positive definite");
  }
  if (m.lyapunovResidual() > tol.lyapunovResidual * scale) {
    throw Error(ErrorCode::NotStable, "Lyapunov residual too large");
  }
  const Index n = q.rows();
  m.qinfInv_ = illt.solve(Matrix::Identity(n, n));
  m.qinfInv_ = 0.5 * (m.qinfInv_ + m.qinfInv_.transpose()).eval();
  m.qinfSqrt_ = linalg::spdSqrt(m.qinf_);
  m.qinfInvSqrt_ = linalg::spdInvSqrt(m.qinf_);
  m.qInv_ = qllt.solve(Matrix::Identity(n, n));
  m.qInv_ = 0.5 * (m.qInv_ + m.qInv_.transpose()).eval();
  m.logDetQinf_ =
      2 * Matrix(illt.matrixL()).diagonal().array().log().sum();
  m.logDetQ_ = 2 * Matrix(qllt.matrixL()).diagonal().array().log().sum();
  return m;
}

OUModel standardModel(Index n) {
  return buildModel(2.0 * Matrix::Identity(n, n), -Matrix::Identity(n, n));
}

Matrix expB(const OUModel &model, double t) {
  return linalg::expm(t * model.B());
}

namespace {

void requirePositiveTime(double t) {
  if (!(t > 0) || !std::isfinite(t)) {
    throw Error(ErrorCode::NonPositiveTime, "time must be positive and finite");
  }
}

double opNorm1(const Matrix &m) {
  return m.cwiseAbs().colwise().sum().maxCoeff();
}

} // namespace

Matrix covarianceQtClosedForm(const OUModel &model, double t) {
  requirePositiveTime(t);
  const Matrix e = expB(model, t);
  Matrix qt = model.Qinf() - e * model.Qinf() * e.transpose();
  return 0.5 * (qt + qt.transpose());
}

Matrix covarianceQtSeries(const OUModel &model, double t) {
  requirePositiveTime(t);
  // Q_t = sum_{k>=1} t^k / k! L^{k-1}(Q), L(X) = B X + X B^T.
  Matrix term = t * model.Q();
  Matrix sum = term;
  for (int k = 2; k < 200; ++k) {
    term = (t / k) * (model.B() * term + term * model.B().transpose());
    sum += term;
    if (term.cwiseAbs().maxCoeff() <=
        1e-18 * sum.cwiseAbs().maxCoeff()) {
      break;
    }
  }
  return 0.5 * (sum + sum.transpose());
}

Matrix covarianceQt(const OUModel &model, double t) {
  requirePositiveTime(t);
  if (t * opNorm1(model.B()) <= 1.0) {
    return covarianceQtSeries(model, t);
  }
  return covarianceQtClosedForm(model, t);
}

Matrix groupDt(const OUModel &model, double t) {
  if (!std::isfinite(t)) {
    throw Error(ErrorCode::NonFinite, "time must be finite");
  }
  return model.Qinf() * linalg::expm(-t * model.B().transpose()) *
         model.QinfInv();
}

double quadraticR(const OUModel &model, const Vector &x) {
  return 0.5 * x.dot(model.QinfInv() * x);
}

double normQ(const OUModel &model, const Vector &x) {
  return (model.QinfInvSqrt() * x).norm();
}

double logGammaDensity(const OUModel &model, double t, const Vector &x) {
  const Index n = model.dim();
  const double log2pi = std::log(2 * std::numbers::pi);
  if (std::isinf(t) && t > 0) {
    return -0.5 * n * log2pi - 0.5 * model.logDetQinf() - quadraticR(model, x);
  }
  const Matrix qt = covarianceQt(model, t);
  Eigen::LLT<Matrix> llt(qt);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotSPD, "Q_t is not positive definite");
  }
  const double logDet =
      2 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  const Vector z = llt.matrixL().solve(x);
  return -0.5 * n * log2pi - 0.5 * logDet - 0.5 * z.squaredNorm();
}

double gammaDensity(const OUModel &model, double t, const Vector &x) {
  return std::exp(logGammaDensity(model, t, x));
}

Vector finiteDifferenceGradient(const std::function<double(const Vector &)> &f,
                                const Vector &x, double h) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

Matrix finiteDifferenceHessian(const std::function<double(const Vector &)> &f,
                               const Vector &x, double h) {
  const Index n = x.size();
  Matrix hess(n, n);
  const double f0 = f(x);
  for (Index i = 0; i < n; ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    hess(i, i) = (f(xp) - 2 * f0 + f(xm)) / (h * h);
    for (Index j = 0; j < i; ++j) {
      Vector pp = x, pm = x, mp = x, mm = x;
      pp(i) += h; pp(j) += h;
      pm(i) += h; pm(j) -= h;
      mp(i) -= h; mp(j) += h;
      mm(i) -= h; mm(j) -= h;
      hess(i, j) = hess(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * h * h);
    }
  }
  return hess;
}

double applyGenerator(const OUModel &model, const ScalarField &f,
                      const Vector &x) {
  constexpr double h = 1e-4;
  const Vector grad =
      f.gradient ? f.gradient(x) : finiteDifferenceGradient(f.value, x, h);
  const Matrix hess =
      f.hessian ? f.hessian(x) : finiteDifferenceHessian(f.value, x, h);
  return 0.5 * (model.Q() * hess).trace() + (model.B() * x).dot(grad);
}

namespace {

Matrix readMatrix(const nlohmann::json &j, Index n, const char *name) {
  if (!j.contains(name)) {
    throw Error(ErrorCode::Parse, std::string("missing field ") + name);
  }
  const auto &arr = j.at(name);
  std::vector<double> flat;
  if (arr.is_array() && !arr.empty() && arr.front().is_array()) {
    for (const auto &row : arr) {
      for (const auto &v : row) {
        flat.push_back(v.get<double>());
      }
    }
  } else {
    flat = arr.get<std::vector<double>>();
  }
  if (static_cast<Index>(flat.size()) != n * n) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(name) + " does not have n*n entries");
  }
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < n; ++k) {
      m(i, k) = flat[static_cast<size_t>(i * n + k)];
    }
  }
  return m;
}

} // namespace

OUModel modelFromJson(const std::string &text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::Parse, e.what());
  }
  if (!j.contains("n") || !j.at("n").is_number_integer() ||
      j.at("n").get<long>() < 1) {
    throw Error(ErrorCode::Parse, "field n must be a positive integer");
  }
  const Index n = j.at("n").get<Index>();
  try {
    return buildModel(readMatrix(j, n, "Q"), readMatrix(j, n, "B"));
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::Parse, e.what());
  }
}

OUModel loadModel(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open model file " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return modelFromJson(ss.str());
}

std::string formatMatrix(const Matrix &m) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << '[';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index k = 0; k < m.cols(); ++k) {
      if (i + k > 0) {
        os << ", ";
      }
      os << m(i, k);
    }
  }
  os << ']';
  return os.str();
}

std::string modelToJson(const OUModel &model) {
  std::ostringstream os;
  os << "{\"n\": " << model.dim() << ", \"Q\": " << formatMatrix(model.Q())
     << ", \"B\": " << formatMatrix(model.B()) << "}";
  return os.str();
}

} // namespace oulab
