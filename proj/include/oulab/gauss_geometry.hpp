#ifndef OULAB_GAUSS_GEOMETRY_HPP
#define OULAB_GAUSS_GEOMETRY_HPP

#include "oulab/ou_model.hpp"
#include "oulab/random.hpp"

namespace oulab {

/// Smooth step: 0 for s <= 0, 1 for s >= 1.
double smoothStep(double s);
double smoothStepDerivative(double s);

/// Index j of the ring {j <= R(x) <= j+1}; integral R goes to the lower ring.
int ringOf(const OUModel &model, const Vector &x);
/// Closed-ring membership, so boundary points belong to both neighbours.
bool inRing(const OUModel &model, const Vector &x, int j);
/// Euclidean width of ring j for the standard 1-D model.
double ringWidth(int j);

/// Radial partition of unity r_j(x) = chi_j(R(x)) and the wider plateau
/// functions rTilde_j. r_j lives on rings j, j+1; rTilde_j equals 1 on
/// rings j-1..j+2 and vanishes outside rings j-2..j+3.
class PartitionOfUnity {
public:
  explicit PartitionOfUnity(const OUModel &model);

  static double chi(int j, double level);
  static double chiDerivative(int j, double level);
  static double chiTilde(int j, double level);
  static double chiTildeDerivative(int j, double level);

  double r(int j, const Vector &x) const;
  double rTilde(int j, const Vector &x) const;
  Vector rGradient(int j, const Vector &x) const;
  Vector rTildeGradient(int j, const Vector &x) const;

  /// eta(x,u) = sum_j rTilde_j(x) r_j(u), in [0, 1].
  double eta(const Vector &x, const Vector &u) const;
  Vector etaGradientX(const Vector &x, const Vector &u) const;
  Vector etaGradientU(const Vector &x, const Vector &u) const;

  double level(const Vector &x) const { return 0.5 * x.dot(qinfInv_ * x); }

private:
  Matrix qinfInv_;
};

double eta(const PartitionOfUnity &pou, const Vector &x, const Vector &u);

struct GradientBound {
  double constant = 0;     // max (|grad_x eta| + |grad_u eta|) / (1 + |x|)
  double halfSample = 0;   // same over the first half of the sample
};

/// Finite-difference gradients of eta at pairs drawn near the diagonal,
/// where eta is in transition.
GradientBound etaGradientBound(const OUModel &model,
                               const PartitionOfUnity &pou,
                               const SampleSpec &spec);

struct PolarCoordinates {
  double beta = 0;
  double s = 0;
  Vector xTilde;
};

/// x = D_s xTilde with R(xTilde) = beta.
PolarCoordinates polarDecompose(const OUModel &model, const Vector &x,
                                double beta);

/// 1/2 log(alpha) <= R(x) <= 2 log(alpha).
bool annulusCAlpha(const OUModel &model, double alpha, const Vector &x);

/// gamma_inf{R > level}, the upper regularized gamma Q(n/2, level).
double levelTailMass(const OUModel &model, double level);

} // namespace oulab

#endif // OULAB_GAUSS_GEOMETRY_HPP
