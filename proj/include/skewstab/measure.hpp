#pragma once

#include <string>
#include <vector>

#include "skewstab/branched_map.hpp"
#include "skewstab/parallel.hpp"

namespace skewstab {

struct WeightedAtom {
  double y = 0.0;  // position in [0,1]
  double w = 0.0;  // strictly positive weight
};

// Signed atomic measure on the fiber [0,1], kept as Jordan parts. Weights are
// stored at cell-mass scale inside a DiscretizedMeasure (the restriction to a
// leaf is the same atom set rescaled by n_cells).
struct FiberAtoms {
  std::vector<WeightedAtom> pos;
  std::vector<WeightedAtom> neg;
  double merge_eps = 1e-6;

  double pos_mass() const;
  double neg_mass() const;
  double signed_mass() const { return pos_mass() - neg_mass(); }
  bool empty() const { return pos.empty() && neg.empty(); }

  // Merges same-sign atoms closer than eps (weights summed, positions
  // weight-averaged), then enforces the per-sign atom cap by absorbing the
  // smallest atoms into their nearest kept neighbor. Returns the transport
  // slack (moved weight x distance) introduced by the cap.
  double coalesce(double eps, int cap = 64);

  void scale(double factor);  // weights *= factor (factor > 0)
};

FiberAtoms delta_atom(double y, double w = 1.0);

// Exact optimum of the bounded-Lipschitz dual problem for the signed measure
// (a - b): sup { integral of h d(a-b) : L(h) <= 1, |h|_inf <= 1 }. Solved as
// one linear program over the joint support (a convex chain problem), never
// by differencing two separate solves.
double w1(const FiberAtoms& a, const FiberAtoms& b);

// ||a||_W = w1(a, 0).
double w_norm(const FiberAtoms& a);

// Dual norm of the signed atom list (y_k, c_k); c may carry either sign.
// Shared by w1 and the test oracles.
double dual_norm(std::vector<std::pair<double, double>> support);

// Signed measure on [0,1]^2 with an explicit disintegration: a marginal
// density (piecewise constant) plus one signed fiber measure per cell, with
// fiber weights at cell-mass scale: signed_mass(fibers[j]) ==
// marginal.values[j] / n_cells.
struct DiscretizedMeasure {
  int n_cells = 0;
  DensityVector marginal;
  std::vector<FiberAtoms> fibers;
  double merge_eps = 1e-6;
  double coalesce_slack = 0.0;  // accumulated atom-cap transport error

  double total_mass() const { return marginal.mass(); }
  void refresh_marginal();  // recompute marginal from fiber masses
  void scale(double factor);
};

struct NormReport {
  double l1 = 0.0;
  double s1 = 0.0;
  double bv_marginal = 0.0;
  double variation = 0.0;
};

// ||mu||_1 = integral over leaves of the W-norm of the restriction.
double norm_l1(const DiscretizedMeasure& mu, Exec mode = Exec::parallel);

// ||mu||_{S^1} = |phi_1|_v + ||mu||_1, plus the path variation for reporting.
NormReport norm_s1(const DiscretizedMeasure& mu, Exec mode = Exec::parallel);

// Variation of the leaf path: sum over consecutive cells of the W-distance
// between restrictions (atom sets at density scale).
double variation(const DiscretizedMeasure& mu, Exec mode = Exec::parallel);

// m x nu2 with the trivial disintegration; nu2 must be a positive probability.
DiscretizedMeasure product_measure(int n_cells, const FiberAtoms& nu2);

// Cellwise signed difference a - b. Requires equal n_cells.
DiscretizedMeasure subtract(const DiscretizedMeasure& a,
                            const DiscretizedMeasure& b);

// Rescales a positive measure to total mass one. Throws when the mass is not
// positive.
void normalize_probability(DiscretizedMeasure& mu);

bool consistent(const DiscretizedMeasure& mu, double tol = 1e-9);

// JSON / CSV serialization (schema: {n_cells, marginal, fibers:[{pos,neg}]}).
std::string measure_to_json(const DiscretizedMeasure& mu);
DiscretizedMeasure measure_from_json(const std::string& text);
void write_measure_csv(const DiscretizedMeasure& mu, const std::string& path);

}  // namespace skewstab
