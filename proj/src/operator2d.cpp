#include "magstep/operator2d.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <unsupported/Eigen/FFT>

#include "magstep/errors.hpp"
#include "magstep/fit.hpp"
#include "magstep/lanczos.hpp"
#include "magstep/tunneling.hpp"

namespace magstep {

namespace {

constexpr double kPi = 3.14159265358979323846;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

double smoothstep(double t) { return t * t * t * (10.0 + t * (-15.0 + 6.0 * t)); }
double smoothstep_d1(double t) { return 30.0 * t * t * (1.0 - t) * (1.0 - t); }

int parity_of(int n) { return ((n % 2) + 2) % 2; }

std::vector<int> mode_window(int n0, int count, ModeParity parity) {
  std::vector<int> out;
  out.reserve(count);
  if (parity == ModeParity::All) {
    for (int j = 0; j < count; ++j) out.push_back(n0 - count / 2 + j);
    return out;
  }
  const int want = parity == ModeParity::Even ? 0 : 1;
  int start = n0 - count;  // count modes of one parity span 2 count
  if (parity_of(start) != want) ++start;
  for (int j = 0; j < count; ++j) out.push_back(start + 2 * j);
  return out;
}

int fft_size(int span, int requested) {
  int n = 64;
  const int need = std::max(requested, std::max(256, 4 * span));
  while (n < need) n *= 2;
  return n;
}

// Toeplitz block T(f)_{ij} = fhat_{n_i - n_j} from the DFT of the samples.
class Symbol {
 public:
  explicit Symbol(int n) : n_(n), spec_(n) {}
  void set(const std::vector<cplx>& samples) {
    fft_.fwd(spec_, samples);
    for (auto& v : spec_) v /= double(n_);
  }
  cplx coef(int j) const { return spec_[size_t(((j % n_) + n_) % n_)]; }
  MatrixXcd toeplitz(const std::vector<int>& modes) const {
    const int m = int(modes.size());
    MatrixXcd t(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) t(i, j) = coef(modes[i] - modes[j]);
    return t;
  }

 private:
  int n_;
  std::vector<cplx> spec_;
  Eigen::FFT<double> fft_;
};

double ahk_estimate(const EdgeConstants& c, double k_max, double k2, double hbar, double* ladder) {
  const double scale = -2.0 * c.m3 / c.mu_pp;
  const double g = std::sqrt(std::max(0.0, -scale * k2 / 2.0));
  const double delta3 = 0.5 * c.mu_pp * g;
  if (ladder) *ladder = 2.0 * delta3 * std::pow(hbar, 1.5);
  return c.beta_a + k_max * c.m3 * hbar + delta3 * std::pow(hbar, 1.5);
}

template <typename F>
auto run_jobs(size_t count, int jobs, F&& work) {
  using R = decltype(work(size_t(0)));
  std::vector<R> out(count);
  const size_t step = size_t(std::max(1, jobs));
  for (size_t start = 0; start < count; start += step) {
    std::vector<std::future<R>> fs;
    for (size_t i = start; i < std::min(count, start + step); ++i)
      fs.push_back(std::async(step > 1 ? std::launch::async : std::launch::deferred, work, i));
    for (size_t i = 0; i < fs.size(); ++i) out[start + i] = fs[i].get();
  }
  return out;
}

}  // namespace

double cutoff(double x) {
  const double ax = std::abs(x);
  if (ax <= 1.0) return 1.0;
  if (ax >= 2.0) return 0.0;
  return 1.0 - smoothstep(ax - 1.0);
}

double cutoff_d1(double x) {
  const double ax = std::abs(x);
  if (ax <= 1.0 || ax >= 2.0) return 0.0;
  return -(x < 0 ? -1.0 : 1.0) * smoothstep_d1(ax - 1.0);
}

WeightedOperator2D assemble_strip(const StripSpec& spec, const StripGrid& grid) {
  if (!(spec.eta > 0 && spec.eta < 0.25))
    throw Error(ErrorCode::ConfigInvalid, "eta must lie in (0, 1/4)");
  if (!(spec.hbar > 0) || !(spec.box_length > 0) || grid.n_sigma < 1)
    throw Error(ErrorCode::ConfigInvalid, "bad strip parameters");
  WeightedOperator2D op;
  op.a = spec.a;
  op.hbar = spec.hbar;
  op.eta = spec.eta;
  op.mu = std::pow(spec.hbar, 0.5 + 2.0 * spec.eta);
  op.gamma0 = spec.gamma0;
  op.box_start = spec.box_start;
  op.box_length = spec.box_length;
  op.parity = grid.parity;
  const double hb = spec.hbar, P = spec.box_length;

  double T = grid.tau_half_width;
  if (T <= 0) T = std::min(std::max(grid.tau_min_width, 4.0 / op.mu), grid.tau_cap);
  int n = grid.n_tau;
  if (n > 0) {
    op.dtau = 2.0 * T / double(n + 1);
  } else {
    const int half = int(std::lround(T / grid.tau_spacing));
    n = 2 * half - 1;
    op.dtau = T / double(half);
  }
  if (n < 3) throw Error(ErrorCode::ConfigInvalid, "normal grid too small");
  op.zero_index = n / 2;
  op.tau.resize(n);
  op.cutoff.resize(n);
  for (int i = 0; i < n; ++i) {
    op.tau(i) = double(i - op.zero_index) * op.dtau;
    op.cutoff(i) = cutoff(op.mu * op.tau(i));
  }
  op.tau_lo = double(-op.zero_index - 1) * op.dtau;
  op.tau_hi = double(n - op.zero_index) * op.dtau;
  op.cutoff_inside = 2.0 / op.mu <= std::min(-op.tau_lo, op.tau_hi);

  // window centered where hbar kappa + gamma0/hbar = -zeta
  op.n0 = int(std::lround(-(spec.gamma0 / hb + spec.zeta) * P / (2.0 * kPi * hb)));
  op.modes = mode_window(op.n0, grid.n_sigma, grid.parity);
  op.flux_residual = spec.gamma0 / hb + hb * 2.0 * kPi * double(op.n0) / P;
  const int M = int(op.modes.size());
  Eigen::VectorXd D(M);
  for (int j = 0; j < M; ++j) D(j) = hb * 2.0 * kPi * double(op.modes[j] - op.n0) / P;
  const int span = op.modes.back() - op.modes.front() + 1;
  const int nq = fft_size(span, grid.quadrature);

  std::vector<double> ks(nq), dks(nq);
  for (int p = 0; p < nq; ++p) {
    const double s = spec.box_start + P * double(p) / double(nq);
    ks[p] = spec.k(s);
    dks[p] = spec.dk(s);
  }

  op.min_weight = std::numeric_limits<double>::infinity();
  op.max_weight = -op.min_weight;
  auto weight_check = [&](double w) {
    op.min_weight = std::min(op.min_weight, w);
    op.max_weight = std::max(op.max_weight, w);
  };

  Symbol s1(nq), s2(nq), s3(nq);
  std::vector<cplx> f1(nq), f2(nq), f3(nq);
  const auto Dm = D.asDiagonal();
  op.diag.assign(n, MatrixXcd::Zero(M, M));
  op.upper.assign(std::max(0, n - 1), MatrixXcd::Zero(M, M));
  for (int i = 0; i < n; ++i) {
    const double t = op.tau(i), c = op.cutoff(i), ct = c * t;
    const double b = step_field(spec.a, t);
    for (int p = 0; p < nq; ++p) {
      const double w = 1.0 - hb * ct * ks[p];
      weight_check(w);
      const double A = op.flux_residual - b * t + hb * c * 0.5 * ks[p] * b * t * t;
      const double rho = -hb * ct * dks[p] / (2.0 * w);
      const cplx cc(A, hb * rho);
      const double iw2 = 1.0 / (w * w);
      f1[p] = iw2;
      f2[p] = iw2 * cc;
      f3[p] = iw2 * std::norm(cc);
    }
    s1.set(f1);
    s2.set(f2);
    s3.set(f3);
    const MatrixXcd T2 = s2.toeplitz(op.modes);
    MatrixXcd K = Dm * s1.toeplitz(op.modes) * Dm;
    K += Dm * T2;
    K += T2.adjoint() * Dm;
    K += s3.toeplitz(op.modes);
    op.diag[i] += K;
  }

  // normal part: |(w_{i+1} - w_i)/dtau - beta (w_i + w_{i+1})/2|^2 on each cell
  const double inv2 = 1.0 / (op.dtau * op.dtau);
  const MatrixXcd I = MatrixXcd::Identity(M, M);
  for (int e = 0; e <= n; ++e) {
    const double tm = op.tau_lo + (double(e) + 0.5) * op.dtau;
    const double c = cutoff(op.mu * tm), ct = c * tm;
    const double dct = c + op.mu * tm * cutoff_d1(op.mu * tm);
    for (int p = 0; p < nq; ++p) {
      const double w = 1.0 - hb * ct * ks[p];
      weight_check(w);
      const double beta = -hb * ks[p] * dct / (2.0 * w);
      f1[p] = beta;
      f2[p] = beta * beta;
    }
    s1.set(f1);
    s2.set(f2);
    const MatrixXcd TB = s1.toeplitz(op.modes), TB2 = 0.25 * s2.toeplitz(op.modes);
    const int l = e - 1, r = e;
    if (l >= 0) op.diag[l] += inv2 * I + TB / op.dtau + TB2;
    if (r < n) op.diag[r] += inv2 * I - TB / op.dtau + TB2;
    if (l >= 0 && r < n) op.upper[l] += -inv2 * I + TB2;
  }
  if (!(op.min_weight > 0))
    throw Error(ErrorCode::WeightNotPositive,
                "weight 1 - hbar c tau k reaches " + std::to_string(op.min_weight));
  if (op.min_weight < spec.min_weight)
    throw Error(ErrorCode::GridGuardFailure,
                "weight " + std::to_string(op.min_weight) + " below guard " +
                    std::to_string(spec.min_weight));
  for (auto& d : op.diag) d = (0.5 * (d + d.adjoint())).eval();
  if (op.hermitian_defect() != 0.0)
    throw Error(ErrorCode::InvariantViolation, "assembled matrix is not Hermitian");
  return op;
}

Eigen::VectorXcd WeightedOperator2D::apply(const Eigen::VectorXcd& x) const {
  const int M = n_sigma(), n = n_tau();
  VectorXcd y(x.size());
  for (int i = 0; i < n; ++i) {
    auto yi = y.segment(Eigen::Index(i) * M, M);
    yi.noalias() = diag[i] * x.segment(Eigen::Index(i) * M, M);
    if (i + 1 < n) yi.noalias() += upper[i] * x.segment(Eigen::Index(i + 1) * M, M);
    if (i > 0) yi.noalias() += upper[i - 1].adjoint() * x.segment(Eigen::Index(i - 1) * M, M);
  }
  return y;
}

Eigen::MatrixXcd WeightedOperator2D::dense() const {
  const int M = n_sigma(), n = n_tau();
  MatrixXcd H = MatrixXcd::Zero(size(), size());
  for (int i = 0; i < n; ++i) {
    H.block(Eigen::Index(i) * M, Eigen::Index(i) * M, M, M) = diag[i];
    if (i + 1 < n) {
      H.block(Eigen::Index(i) * M, Eigen::Index(i + 1) * M, M, M) = upper[i];
      H.block(Eigen::Index(i + 1) * M, Eigen::Index(i) * M, M, M) = upper[i].adjoint();
    }
  }
  return H;
}

Eigen::SparseMatrix<cplx> WeightedOperator2D::sparse() const {
  const int M = n_sigma(), n = n_tau();
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(size_t(n) * M * M * 3);
  auto put = [&](int bi, int bj, const MatrixXcd& B) {
    for (int r = 0; r < M; ++r)
      for (int c = 0; c < M; ++c)
        if (B(r, c) != cplx(0)) trip.emplace_back(bi * M + r, bj * M + c, B(r, c));
  };
  for (int i = 0; i < n; ++i) {
    put(i, i, diag[i]);
    if (i + 1 < n) {
      put(i, i + 1, upper[i]);
      put(i + 1, i, upper[i].adjoint());
    }
  }
  Eigen::SparseMatrix<cplx> S(size(), size());
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

double WeightedOperator2D::hermitian_defect() const {
  double d = 0;
  for (const auto& b : diag) d = std::max(d, (b - b.adjoint()).cwiseAbs().maxCoeff());
  return d;
}

namespace {

// Block LL^* factorization of H - shift; fails when H - shift is not
// positive definite.
struct BlockCholesky {
  std::vector<Eigen::LLT<MatrixXcd>> llt;
  std::vector<MatrixXcd> g;  // S_i^{-1} E_i
  std::vector<const MatrixXcd*> upper;
  bool ok = false;

  BlockCholesky(const WeightedOperator2D& op, double shift) {
    const int n = op.n_tau(), M = op.n_sigma();
    llt.resize(n);
    g.resize(std::max(0, n - 1));
    for (const auto& e : op.upper) upper.push_back(&e);
    MatrixXcd S = op.diag[0] - shift * MatrixXcd::Identity(M, M);
    for (int i = 0; i < n; ++i) {
      llt[i].compute(S);
      if (llt[i].info() != Eigen::Success) return;
      if (i + 1 < n) {
        g[i] = llt[i].solve(op.upper[i]);
        S = op.diag[i + 1] - shift * MatrixXcd::Identity(M, M) - op.upper[i].adjoint() * g[i];
      }
    }
    ok = true;
  }

  VectorXcd solve(const VectorXcd& b) const {
    const int n = int(llt.size()), M = int(b.size() / n);
    VectorXcd z(b.size()), r;
    for (int i = 0; i < n; ++i) {
      r = b.segment(Eigen::Index(i) * M, M);
      if (i > 0) r.noalias() -= upper[i - 1]->adjoint() * z.segment(Eigen::Index(i - 1) * M, M);
      z.segment(Eigen::Index(i) * M, M) = llt[i].solve(r);
    }
    for (int i = n - 2; i >= 0; --i)
      z.segment(Eigen::Index(i) * M, M) -= g[i] * z.segment(Eigen::Index(i + 1) * M, M);
    return z;
  }
};

}  // namespace

EigenResult lowest_eigs(const WeightedOperator2D& op, int count, double tol, bool want_vectors) {
  if (count < 1) throw Error(ErrorCode::ConfigInvalid, "count must be positive");
  // shift below the lowest eigenvalue, moving down until the factorization succeeds
  double step = 1e-4 * std::max(1.0, std::abs(op.shift_hint));
  double shift = op.shift_hint;
  std::unique_ptr<BlockCholesky> fac;
  for (int attempt = 0; attempt < 60; ++attempt) {
    fac = std::make_unique<BlockCholesky>(op, shift);
    if (fac->ok) break;
    shift -= step;
    step *= 2.0;
  }
  if (!fac->ok) throw Error(ErrorCode::ConvergenceFailure, "no positive definite shift found");
  auto solve = [&](const VectorXcd& b) { return fac->solve(b); };
  auto apply = [&](const VectorXcd& x) { return op.apply(x); };
  LanczosOptions lo;
  if (op.level_spacing > 0) {
    // coarse Ritz value, then move the shift just below it
    lo.max_iterations = 30;
    lo.tol = 1e-6;
    lo.throw_on_failure = false;
    const auto rough = shift_invert_lanczos<cplx>(solve, apply, op.size(), shift, 1, lo);
    double gap = 0.25 * op.level_spacing;
    if (rough.values(0) - shift > 4.0 * gap) {
      for (int attempt = 0; attempt < 60; ++attempt) {
        const double s = rough.values(0) - gap;
        if (s <= shift) break;
        auto f = std::make_unique<BlockCholesky>(op, s);
        if (f->ok) {
          fac = std::move(f);
          shift = s;
          break;
        }
        gap *= 2.0;
      }
    }
  }
  lo = LanczosOptions{};
  lo.tol = tol;
  lo.max_iterations = 600;
  auto res = shift_invert_lanczos<cplx>(solve, apply, op.size(), shift, count, lo);
  EigenResult out;
  out.values = res.values;
  out.residuals = res.residuals;
  out.iterations = res.iterations;
  out.shift = shift;
  const int M = op.n_sigma();
  const double ell = 1.0 / std::sqrt(std::min(1.0, std::abs(op.a)));
  double tail = 0, total = 0;
  for (int i = 0; i < op.n_tau(); ++i) {
    const double m = res.vectors.col(0).segment(Eigen::Index(i) * M, M).squaredNorm();
    total += m;
    if (std::abs(op.tau(i)) > 5.0 * ell) tail += m;
  }
  out.tail_mass = tail / total;
  if (want_vectors) out.vectors = res.vectors;
  return out;
}

Eigen::VectorXd dense_eigs(const WeightedOperator2D& op, int count) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(op.dense(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().head(std::min<Eigen::Index>(count, op.size()));
}

double fiber_band_minimum(const WeightedOperator2D& op) {
  Grid1D g;
  g.n_points = op.n_tau() + 2;
  g.tau_min = op.tau_lo;
  g.tau_max = op.tau_hi;
  g.nodes.resize(g.n_points);
  for (Eigen::Index i = 0; i < g.n_points; ++i) g.nodes(i) = op.tau_lo + double(i) * op.dtau;
  double best = std::numeric_limits<double>::infinity();
  for (int m : op.modes) {
    const double D = op.hbar * 2.0 * kPi * double(m - op.n0) / op.box_length;
    best = std::min(best, fiber_eigenvalue(op.a, -(D + op.flux_residual), g));
  }
  return best;
}

void write_coo(const WeightedOperator2D& op, const std::string& path) {
  const auto S = op.sparse();
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::ConfigInvalid, "cannot write " + path);
  f << "% coordinate complex hermitian-full " << S.rows() << " " << S.cols() << " "
    << S.nonZeros() << "\n";
  f << std::setprecision(17);
  for (int k = 0; k < S.outerSize(); ++k)
    for (Eigen::SparseMatrix<cplx>::InnerIterator it(S, k); it; ++it)
      f << it.row() << " " << it.col() << " " << it.value().real() << " " << it.value().imag()
        << "\n";
}

WeightedOperator2D assemble_full(const EdgeConstants& c, const CurveModel& curve, double hbar,
                                 double eta, const StripGrid& grid, double flux_shift) {
  StripSpec s;
  s.a = c.a;
  s.zeta = c.zeta_a;
  s.hbar = hbar;
  s.eta = eta;
  s.gamma0 = circulation(curve) + flux_shift;
  s.box_start = -curve.half_length;
  s.box_length = curve.length();
  s.k = [&curve](double x) { return curve.curvature(x); };
  s.dk = [&curve](double x) { return curve.curvature_d1(x); };
  s.k_max = curve.k_max;
  WeightedOperator2D op = assemble_strip(s, grid);
  double ladder = 0;
  op.shift_hint = ahk_estimate(c, curve.k_max, curve.k2, hbar, &ladder) - ladder;
  op.level_spacing = ladder;
  return op;
}

WellExtension extend_curvature(const CurveModel& curve, WellSide side, double pad_fraction) {
  const double L = curve.half_length;
  const double eh = std::min(0.25, L / 4.0) / 2.0;
  const double lo = curve.s_ell, hi = curve.s_ell + 2.0 * L;
  auto chi = [=](double s) {
    if (s <= lo || s >= hi) return 0.0;
    if (s < lo + eh) return smoothstep((s - lo) / eh);
    if (s > hi - eh) return smoothstep((hi - s) / eh);
    return 1.0;
  };
  auto dchi = [=](double s) {
    if (s <= lo || s >= hi) return 0.0;
    if (s < lo + eh) return smoothstep_d1((s - lo) / eh) / eh;
    if (s > hi - eh) return -smoothstep_d1((hi - s) / eh) / eh;
    return 0.0;
  };
  const CurveModel* cp = &curve;
  std::function<double(double)> kr = [=](double s) { return cp->curvature(s) * chi(s); };
  std::function<double(double)> dkr = [=](double s) {
    return cp->curvature_d1(s) * chi(s) + cp->curvature(s) * dchi(s);
  };
  const double pad = pad_fraction * L;
  WellExtension ext;
  ext.eta_hat = eh;
  ext.k_max = curve.k_max;
  ext.box_length = 2.0 * L + 2.0 * pad;

  // the blend keeps k near the opposite well, so local maxima there are
  // expected; they must stay strictly below k_max
  const int ns = 16384;
  const double ds = ext.box_length / ns;
  std::vector<double> v(ns + 1);
  for (int j = 0; j <= ns; ++j) v[j] = kr(lo - pad + ds * double(j));
  const double slack = 1e-9 * std::max(1.0, curve.k_max);
  ext.secondary_max = -std::numeric_limits<double>::infinity();
  for (int j = 1; j < ns; ++j) {
    if (!(v[j] >= v[j - 1] && v[j] >= v[j + 1]) || v[j] == 0.0) continue;
    const double s = lo - pad + ds * double(j);
    if (std::abs(s - curve.s_r) <= 2.0 * ds) continue;
    ext.secondary_max = std::max(ext.secondary_max, v[j]);
    if (v[j] >= curve.k_max - slack)
      throw Error(ErrorCode::ExtensionNotUnimodal,
                  "extended curvature reaches k_max again near s = " + std::to_string(s));
  }
  if (kr(curve.s_r) < curve.k_max - slack)
    throw Error(ErrorCode::ExtensionNotUnimodal, "maximum moved off s_r");
  if (side == WellSide::Right) {
    ext.box_start = lo - pad;
    ext.k = kr;
    ext.dk = dkr;
  } else {
    ext.box_start = -(hi + pad);
    ext.k = [=](double s) { return kr(-s); };
    ext.dk = [=](double s) { return -dkr(-s); };
  }
  return ext;
}

WeightedOperator2D assemble_single_well(const EdgeConstants& c, const CurveModel& curve,
                                        WellSide side, double hbar, double eta,
                                        const StripGrid& grid, bool with_flux) {
  const WellExtension ext = extend_curvature(curve, side);
  StripSpec s;
  s.a = c.a;
  s.zeta = c.zeta_a;
  s.hbar = hbar;
  s.eta = eta;
  s.gamma0 = with_flux ? circulation(curve) : 0.0;
  s.box_start = ext.box_start;
  s.box_length = ext.box_length;
  s.k = ext.k;
  s.dk = ext.dk;
  s.k_max = ext.k_max;
  StripGrid g = grid;
  g.parity = ModeParity::All;
  WeightedOperator2D op = assemble_strip(s, g);
  double ladder = 0;
  op.shift_hint = ahk_estimate(c, curve.k_max, curve.k2, hbar, &ladder) - ladder;
  op.level_spacing = ladder;
  return op;
}

AhkFit ahk_coefficient_fit(const EdgeConstants& c, const CurveModel& curve,
                           const std::vector<double>& hbars, double eta, const StripGrid& grid,
                           int extra_terms, int jobs) {
  if (hbars.size() < 3) throw Error(ErrorCode::FitIllConditioned, "need at least three hbar values");
  const auto [lo, hi] = std::minmax_element(hbars.begin(), hbars.end());
  if (*hi < 3.0 * *lo) throw Error(ErrorCode::FitIllConditioned, "hbar range spans less than 3x");
  AhkFit f;
  f.hbar = hbars;
  f.nu = run_jobs(hbars.size(), jobs, [&](size_t i) {
    const auto op = assemble_single_well(c, curve, WellSide::Right, hbars[i], eta, grid);
    return lowest_eigs(op, 1).values(0);
  });
  const Eigen::Index n = Eigen::Index(hbars.size());
  auto solve_fit = [&](int terms) {
    Eigen::MatrixXd A(n, terms);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < terms; ++j)
        A(i, j) = j == 0 ? 1.0 : std::pow(hbars[size_t(i)], 0.5 * double(j + 1));
      y(i) = f.nu[size_t(i)];
    }
    return least_squares(A, y);
  };
  const LinearFit lf = solve_fit(3 + std::max(0, extra_terms));
  f.beta_fit = lf.coef(0);
  f.c1_fit = lf.coef(1);
  f.c2_fit = lf.coef(2);
  f.rms = lf.rms;
  f.extra.assign(lf.coef.data() + 3, lf.coef.data() + lf.coef.size());
  const LinearFit l3 = solve_fit(3);
  f.three_term = {l3.coef(0), l3.coef(1), l3.coef(2)};
  f.beta = c.beta_a;
  f.c1 = curve.k_max * c.m3;
  double ladder = 0;
  ahk_estimate(c, curve.k_max, curve.k2, 1.0, &ladder);
  f.c2 = 0.5 * ladder;
  return f;
}

bool half_period_symmetric(const CurveModel& curve, double tol) {
  const double L = curve.half_length;
  double worst = 0, scale = 0;
  for (Eigen::Index j = 0; j < curve.s_nodes.size(); j += 7) {
    const double s = curve.s_nodes(j);
    worst = std::max(worst, std::abs(curve.curvature(s + L) - curve.curvature(s)));
    scale = std::max(scale, std::abs(curve.curvature(s)));
  }
  return worst <= tol * std::max(1.0, scale);
}

Gap2D gap_2d(const EdgeConstants& c, const CurveModel& curve, double hbar, double eta,
             const StripGrid& grid, double flux_shift) {
  Gap2D g;
  g.hbar = hbar;
  double ladder = 0;
  ahk_estimate(c, curve.k_max, curve.k2, hbar, &ladder);
  const double floor = 1e-13;
  if (half_period_symmetric(curve)) {
    g.split = true;
    StripGrid ge = grid, go = grid;
    ge.parity = ModeParity::Even;
    go.parity = ModeParity::Odd;
    const auto re = lowest_eigs(assemble_full(c, curve, hbar, eta, ge, flux_shift), 1);
    const auto ro = lowest_eigs(assemble_full(c, curve, hbar, eta, go, flux_shift), 1);
    g.signed_gap = ro.values(0) - re.values(0);
    g.nu1 = std::min(re.values(0), ro.values(0));
    g.nu2 = std::max(re.values(0), ro.values(0));
    const double r2 = std::pow(re.residuals(0) * std::max(1.0, std::abs(re.values(0))), 2) +
                      std::pow(ro.residuals(0) * std::max(1.0, std::abs(ro.values(0))), 2);
    g.resolution = floor + r2 / ladder;
  } else {
    const auto r = lowest_eigs(assemble_full(c, curve, hbar, eta, grid, flux_shift), 2);
    g.nu1 = r.values(0);
    g.nu2 = r.values(1);
    g.signed_gap = g.nu2 - g.nu1;
    const double r2 = std::pow(r.residuals(0) * std::max(1.0, std::abs(r.values(0))), 2) +
                      std::pow(r.residuals(1) * std::max(1.0, std::abs(r.values(1))), 2);
    g.resolution = floor + r2 / ladder;
  }
  g.gap = g.nu2 - g.nu1;
  return g;
}

EnvelopeRow gap_envelope(const EdgeConstants& c, const CurveModel& curve, double hbar, double eta,
                         const StripGrid& grid) {
  EnvelopeRow row;
  row.hbar = hbar;
  const double h = hbar * hbar;
  const Gap2D g0 = gap_2d(c, curve, hbar, eta, grid, 0.0);
  const Gap2D g1 = gap_2d(c, curve, hbar, eta, grid, kPi * h / (2.0 * curve.half_length));
  row.gap0 = g0.signed_gap;
  row.gap_quarter = g1.signed_gap;
  row.envelope = std::hypot(g0.signed_gap, g1.signed_gap);
  if (row.envelope < 10.0 * (g0.resolution + g1.resolution))
    throw Error(ErrorCode::GapBelowNoiseFloor,
                "gap envelope " + std::to_string(row.envelope) + " at hbar " + std::to_string(hbar));
  const TunnelingPrediction p = splitting_predict(c, curve, 0.0, h);
  row.predicted = 2.0 * p.prefactor *
                  std::sqrt(2.0 * (p.component_u * p.component_u + p.component_d * p.component_d)) / h;
  return row;
}

ExponentFit2D gap_exponent_fit_2d(const EdgeConstants& c, const CurveModel& curve,
                                  const std::vector<double>& hbars, double eta,
                                  const StripGrid& grid, int jobs) {
  ExponentFit2D f;
  f.rows = run_jobs(hbars.size(), jobs,
                    [&](size_t i) { return gap_envelope(c, curve, hbars[i], eta, grid); });
  const Eigen::Index n = Eigen::Index(hbars.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = f.rows[size_t(i)];
    A(i, 0) = 1.0;
    A(i, 1) = -1.0 / std::sqrt(r.hbar);
    y(i) = std::log(r.envelope) - f.power * std::log(r.hbar);
  }
  const LinearFit lf = least_squares(A, y);
  f.S_fit = lf.coef(1);
  f.rms = lf.rms;
  return f;
}

InterferenceScan interference_scan(const EdgeConstants& c, const CurveModel& curve, double hbar_lo,
                                   double hbar_hi, int n_points, double eta, const StripGrid& grid,
                                   int jobs) {
  InterferenceScan sc;
  const double x_lo = 1.0 / (hbar_hi * hbar_hi), x_hi = 1.0 / (hbar_lo * hbar_lo);
  auto signed_gap = [&](double x) { return gap_2d(c, curve, 1.0 / std::sqrt(x), eta, grid).signed_gap; };
  std::vector<double> xs(size_t(std::max(2, n_points)));
  for (size_t i = 0; i < xs.size(); ++i)
    xs[i] = x_lo + (x_hi - x_lo) * double(i) / double(xs.size() - 1);
  const auto ds = run_jobs(xs.size(), jobs, [&](size_t i) { return signed_gap(xs[i]); });
  for (size_t i = 0; i < xs.size(); ++i) {
    sc.hbar.push_back(1.0 / std::sqrt(xs[i]));
    sc.signed_gap.push_back(ds[i]);
  }
  std::vector<size_t> brackets;
  for (size_t i = 0; i + 1 < xs.size(); ++i)
    if (ds[i] == 0.0 || (ds[i] < 0) != (ds[i + 1] < 0)) brackets.push_back(i);
  sc.zeros_inv_h = run_jobs(brackets.size(), jobs, [&](size_t b) {
    // Illinois regula falsi
    size_t i = brackets[b];
    double a = xs[i], fa = ds[i], bx = xs[i + 1], fb = ds[i + 1];
    if (fa == 0.0) return a;
    int side = 0;
    for (int it = 0; it < 8; ++it) {
      const double x = (a * fb - bx * fa) / (fb - fa);
      const double fx = signed_gap(x);
      if ((fx < 0) == (fb < 0)) {
        bx = x;
        fb = fx;
        if (side == -1) fa *= 0.5;
        side = -1;
      } else {
        a = x;
        fa = fx;
        if (side == 1) fb *= 0.5;
        side = 1;
      }
      if (std::abs(bx - a) < 1e-6 * std::abs(a)) break;
    }
    return (a * fb - bx * fa) / (fb - fa);
  });
  std::sort(sc.zeros_inv_h.begin(), sc.zeros_inv_h.end());
  if (sc.zeros_inv_h.size() >= 2)
    sc.spacing = (sc.zeros_inv_h.back() - sc.zeros_inv_h.front()) /
                 double(sc.zeros_inv_h.size() - 1);
  sc.expected = kPi / (curve.half_length * circulation(curve));
  return sc;
}

}  // namespace magstep
