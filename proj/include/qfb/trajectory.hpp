#pragma once

// Quantum-jump unraveling with an optional classical filter f(t):
//   H(t) = H0 + f(t) H_f,  H_f diagonal,  f -> f + 1 on selected jumps,
//   df/dt = -kappa f between jumps.
// The f-dependent part is removed exactly by the frame psi = exp(-i Phi H_f) psi~
// with dPhi/dt = f, leaving entries of H0 rotating at frequencies fixed by
// differences of diag(H_f).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "qfb/analysis.hpp"
#include "qfb/models.hpp"

namespace qfb {

using RowSparse = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

struct UnravelChannel {
  std::string name;
  SparseMat op;
  double rate = 1.0;
  bool increments_filter = false;
};

struct UnravelSpec {
  SpaceSpec space;
  SparseMat h0;
  Eigen::VectorXd filter_diag;  // diagonal of H_f; empty when there is no filter
  double filter_decay = 0.0;
  std::vector<UnravelChannel> channels;

  bool has_filter() const { return filter_diag.size() > 0; }

  void validate() const {
    const int d = space.total_dim();
    if (h0.rows() != d || h0.cols() != d) throw SpaceMismatch("unravel: Hamiltonian dimension");
    if (channels.empty()) throw ContractViolation("unravel: at least one jump channel required");
    int increments = 0;
    for (const auto& ch : channels) {
      if (!(ch.rate > 0.0)) throw ContractViolation("unravel: channel '" + ch.name + "' needs a positive rate");
      if (ch.op.rows() != d || ch.op.cols() != d) throw SpaceMismatch("unravel: channel '" + ch.name + "' dimension");
      increments += ch.increments_filter ? 1 : 0;
    }
    if (has_filter() && filter_diag.size() != d) throw SpaceMismatch("unravel: filter Hamiltonian dimension");
    if (increments > 0 && !has_filter()) throw ContractViolation("unravel: filter increments without a filter term");
    if (filter_decay < 0.0) throw ContractViolation("unravel: filter decay must be >= 0");
  }

  static UnravelSpec from_descriptor(const GeneratorDescriptor& desc) {
    UnravelSpec u;
    u.space = desc.space;
    u.h0 = desc.hamiltonian.matrix();
    for (const auto& ch : desc.channels) u.channels.push_back({ch.name, ch.op.matrix(), ch.rate, ch.increments_filter});
    if (desc.kind == GeneratorDescriptor::Kind::time_dependent) {
      const SparseMat& hf = desc.filter_hamiltonian->matrix();
      if (!is_diagonal(hf)) throw ContractViolation("unravel: filter Hamiltonian must be diagonal");
      u.filter_diag.resize(hf.rows());
      for (int i = 0; i < hf.rows(); ++i) u.filter_diag(i) = hf.coeff(i, i).real();
      u.filter_decay = desc.filter_decay;
    } else {
      for (auto& ch : u.channels) ch.increments_filter = false;
    }
    u.validate();
    return u;
  }

  static UnravelSpec plain(const Operator& h, const std::vector<JumpChannel>& channels) {
    return from_descriptor(static_descriptor(h, channels));
  }
};

struct TrajectoryOptions {
  std::vector<double> sample_times;  // sorted within [0, T]; T is always sampled last
  double max_step = 0.02;
  double truncation_limit = 1e-4;  // top-level population bound per fock factor
  int truncation_levels = 2;
};

struct JumpEvent {
  double t = 0.0;
  int channel = 0;
};

struct TrajectoryRecord {
  std::uint64_t seed = 0;
  std::vector<JumpEvent> jumps;
  std::vector<double> sample_times;
  std::vector<double> f_samples;
  std::vector<Vec> sample_states;  // normalized, lab frame
  Vec final_state;
  double step = 0.0;
  double max_top_population = 0.0;
  bool truncation_flag = false;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t trajectory_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

namespace detail {

// H_eff in the rotating frame as sum_g exp(i w_g Phi) H_g.
struct FrameHamiltonian {
  std::vector<double> freqs;
  std::vector<RowSparse> parts;
  double norm_bound = 0.0;
};

inline FrameHamiltonian split_by_frequency(const SparseMat& heff, const Eigen::VectorXd& diag) {
  std::map<long long, std::vector<Triplet>> groups;
  std::map<long long, double> freq_of;
  const double quantum = 1e-9;
  for (int j = 0; j < heff.outerSize(); ++j)
    for (SparseMat::InnerIterator it(heff, j); it; ++it) {
      const double w = diag.size() ? diag(it.row()) - diag(it.col()) : 0.0;
      const long long key = std::llround(w / quantum);
      groups[key].emplace_back(it.row(), it.col(), it.value());
      freq_of[key] = w;
    }
  FrameHamiltonian out;
  for (auto& [key, trips] : groups) {
    RowSparse m(heff.rows(), heff.cols());
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    double col_norm = 0.0;
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(m.rows());
    for (int i = 0; i < m.outerSize(); ++i)
      for (RowSparse::InnerIterator it(m, i); it; ++it) rows(i) += std::abs(it.value());
    col_norm = rows.size() ? rows.maxCoeff() : 0.0;
    out.norm_bound += col_norm;
    out.freqs.push_back(freq_of[key]);
    out.parts.push_back(std::move(m));
  }
  return out;
}

class Integrator {
 public:
  Integrator(const UnravelSpec& spec, double max_step) : spec_(spec) {
    const int d = spec.space.total_dim();
    SparseMat heff = spec.h0;
    for (const auto& ch : spec.channels)
      heff += cplx(0.0, -0.5 * ch.rate) * SparseMat(SparseMat(ch.op.adjoint()) * ch.op);
    frame_ = split_by_frequency(heff, spec.filter_diag);
    double fastest = 0.0;
    for (const auto& ch : spec.channels) fastest = std::max(fastest, ch.rate);
    step_ = max_step;
    if (fastest > 0.0) step_ = std::min(step_, 0.05 / fastest);
    if (frame_.norm_bound > 0.0) step_ = std::min(step_, 0.1 / frame_.norm_bound);
    tmp_.resize(d);
    for (auto& k : k_) k.resize(d);
  }

  double step() const { return step_; }

  // Filter state: f(t) = f_ref exp(-kappa (t - t_ref)), Phi continuous.
  double f_at(double t) const { return f_ref_ * std::exp(-spec_.filter_decay * (t - t_ref_)); }
  double phi_at(double t) const {
    const double tau = t - t_ref_;
    const double k = spec_.filter_decay;
    return phi_ref_ + f_ref_ * (k > 0.0 ? -std::expm1(-k * tau) / k : tau);
  }
  void kick_filter(double t) {
    phi_ref_ = phi_at(t);
    f_ref_ = f_at(t) + 1.0;
    t_ref_ = t;
  }

  // One RK4 step of d psi/dt = -i H~(t) psi.
  void rk4(double t, double h, const Vec& y, Vec& out) {
    deriv(t, y, k_[0]);
    tmp_ = y + (0.5 * h) * k_[0];
    deriv(t + 0.5 * h, tmp_, k_[1]);
    tmp_ = y + (0.5 * h) * k_[1];
    deriv(t + 0.5 * h, tmp_, k_[2]);
    tmp_ = y + h * k_[2];
    deriv(t + h, tmp_, k_[3]);
    out = y + (h / 6.0) * (k_[0] + 2.0 * k_[1] + 2.0 * k_[2] + k_[3]);
  }

  // Frame conversions (identity without a filter).
  void to_lab(double t, Vec& psi) const {
    if (!spec_.has_filter()) return;
    const double phi = phi_at(t);
    for (int i = 0; i < psi.size(); ++i) psi(i) *= std::exp(cplx(0.0, -phi * spec_.filter_diag(i)));
  }
  void to_frame(double t, Vec& psi) const {
    if (!spec_.has_filter()) return;
    const double phi = phi_at(t);
    for (int i = 0; i < psi.size(); ++i) psi(i) *= std::exp(cplx(0.0, phi * spec_.filter_diag(i)));
  }

 private:
  void deriv(double t, const Vec& y, Vec& out) const {
    const double phi = spec_.has_filter() ? phi_at(t) : 0.0;
    out.setZero();
    for (std::size_t g = 0; g < frame_.parts.size(); ++g) {
      const cplx ph = frame_.freqs[g] == 0.0 ? cplx(0.0, -1.0) : cplx(0.0, -1.0) * std::exp(cplx(0.0, frame_.freqs[g] * phi));
      out.noalias() += ph * (frame_.parts[g] * y);
    }
  }

  const UnravelSpec& spec_;
  FrameHamiltonian frame_;
  double step_ = 0.0;
  double f_ref_ = 0.0, phi_ref_ = 0.0, t_ref_ = 0.0;
  Vec tmp_;
  Vec k_[4];
};

inline double uniform53(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

inline TrajectoryRecord simulate_trajectory(const UnravelSpec& spec, const Vec& psi0, double t_final,
                                            std::uint64_t seed, const TrajectoryOptions& opt = {}) {
  spec.validate();
  const int d = spec.space.total_dim();
  if (psi0.size() != d) throw SpaceMismatch("simulate_trajectory: initial state dimension");
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw ContractViolation("simulate_trajectory: initial state not normalized");
  if (!(t_final >= 0.0)) throw ContractViolation("simulate_trajectory: T must be >= 0");

  std::vector<double> samples;
  for (double s : opt.sample_times) {
    if (s < 0.0 || s > t_final) throw ContractViolation("sample time outside [0, T]");
    if (!samples.empty() && s <= samples.back()) throw ContractViolation("sample times must be increasing");
    samples.push_back(s);
  }
  if (samples.empty() || samples.back() < t_final) samples.push_back(t_final);

  detail::Integrator integ(spec, opt.max_step);
  std::mt19937_64 rng(seed);
  TrajectoryRecord rec;
  rec.seed = seed;
  rec.step = integ.step();
  rec.sample_times = samples;

  Vec psi = psi0;  // frame state, unnormalized between jumps
  Vec next(d), trial(d);
  double t = 0.0;
  double threshold = 1.0 - detail::uniform53(rng);

  auto record_sample = [&](double ts) {
    Vec lab = psi / psi.norm();
    integ.to_lab(ts, lab);
    rec.f_samples.push_back(integ.f_at(ts));
    const DenseMat rho = lab * lab.adjoint();
    for (double p : truncation_health(spec.space, rho, opt.truncation_levels)) {
      rec.max_top_population = std::max(rec.max_top_population, p);
      if (p > opt.truncation_limit) rec.truncation_flag = true;
    }
    rec.sample_states.push_back(std::move(lab));
  };

  auto do_jump = [&](double tj) {
    Vec lab = psi;
    integ.to_lab(tj, lab);
    std::vector<double> weights;
    std::vector<Vec> outs;
    double total = 0.0;
    for (const auto& ch : spec.channels) {
      Vec o = ch.op * lab;
      const double w = ch.rate * o.squaredNorm();
      weights.push_back(w);
      total += w;
      outs.push_back(std::move(o));
    }
    if (!(total > 0.0) || !std::isfinite(total)) throw ConvergenceError("jump with vanishing total rate");
    const double u = detail::uniform53(rng) * total;
    std::size_t k = 0;
    double acc = weights[0];
    while (k + 1 < weights.size() && (u >= acc || weights[k] == 0.0)) acc += weights[++k];
    rec.jumps.push_back({tj, static_cast<int>(k)});
    if (spec.channels[k].increments_filter) integ.kick_filter(tj);
    psi = outs[k] / outs[k].norm();
    integ.to_frame(tj, psi);
    threshold = 1.0 - detail::uniform53(rng);
  };

  std::size_t next_sample = 0;
  while (next_sample < samples.size() && samples[next_sample] <= 0.0) record_sample(samples[next_sample++]);
  while (next_sample < samples.size()) {
    const double target = samples[next_sample];
    while (t < target) {
      const long n_steps = std::max(1L, static_cast<long>(std::ceil((target - t) / integ.step() - 1e-9)));
      const double h = std::min(integ.step(), (target - t) / static_cast<double>(n_steps));
      const double t_end = (n_steps == 1) ? target : t + h;
      const double hh = t_end - t;
      integ.rk4(t, hh, psi, next);
      const double n2 = next.squaredNorm();
      if (!std::isfinite(n2)) throw ConvergenceError("trajectory state became non-finite");
      if (n2 > threshold) {
        psi.swap(next);
        t = t_end;
        continue;
      }
      // Locate the crossing inside [t, t_end] by bisection on the step length.
      double lo = 0.0, hi = hh;
      for (int it = 0; it < 48 && hi - lo > 1e-13 * std::max(1.0, t); ++it) {
        const double mid = 0.5 * (lo + hi);
        integ.rk4(t, mid, psi, trial);
        if (trial.squaredNorm() > threshold) lo = mid;
        else hi = mid;
      }
      integ.rk4(t, hi, psi, trial);
      if (trial.squaredNorm() < 1e-300) throw ConvergenceError("trajectory norm underflow");
      psi.swap(trial);
      t += hi;
      if (t > target) t = target;
      do_jump(t);
    }
    record_sample(target);
    ++next_sample;
  }
  rec.final_state = rec.sample_states.back();
  return rec;
}

struct ObservableEstimate {
  std::string name;
  std::vector<double> mean;
  std::vector<double> stderr_;
};

struct EnsembleOptions {
  TrajectoryOptions trajectory;
  int workers = 1;
  std::vector<std::pair<std::string, Operator>> observables;  // Hermitian observables
  int batches = 20;                   // contiguous index batches for resampling errors
  double max_discard_fraction = 0.01;
  int block = 128;                    // trajectories held in memory before reduction
};

struct EnsembleEstimate {
  SpaceSpec space;
  int n_traj = 0;        // kept trajectories
  int n_discarded = 0;
  std::vector<double> times;
  std::vector<DenseMat> rho;                // ensemble mean per sample time
  std::vector<Eigen::MatrixXd> rho_stderr_re, rho_stderr_im;
  std::vector<ObservableEstimate> observables;
  std::vector<DenseMat> batch_final;        // per-batch mean state at T
  std::vector<int> batch_counts;
  double step = 0.0;
  double max_top_population = 0.0;

  DensityMatrix state_at(std::size_t sample) const {
    return DensityMatrix::symmetrized(space, rho.at(sample), {1e-10, 1e-9, -1e-6});
  }
  DensityMatrix final_state() const { return state_at(rho.size() - 1); }
};

inline EnsembleEstimate ensemble_average(const UnravelSpec& spec, const Vec& psi0, double t_final, int n_traj,
                                         std::uint64_t master_seed, const EnsembleOptions& opt = {}) {
  if (n_traj < 1) throw ContractViolation("ensemble_average: n_traj must be >= 1");
  if (opt.workers < 1) throw ContractViolation("ensemble_average: workers must be >= 1");
  spec.validate();
  const int d = spec.space.total_dim();
  for (const auto& [name, op] : opt.observables)
    if (!(op.space() == spec.space)) throw SpaceMismatch("observable '" + name + "' on wrong space");
  const int batches = std::max(1, std::min(opt.batches, n_traj));

  EnsembleEstimate est;
  est.space = spec.space;
  std::vector<DenseMat> sum_rho;
  std::vector<Eigen::MatrixXd> sq_re, sq_im;
  std::vector<std::vector<double>> obs_sum(opt.observables.size()), obs_sq(opt.observables.size());
  est.batch_final.assign(batches, DenseMat::Zero(d, d));
  est.batch_counts.assign(batches, 0);

  std::vector<TrajectoryRecord> slots;
  std::vector<std::string> errors;
  for (int start = 0; start < n_traj; start += opt.block) {
    const int count = std::min(opt.block, n_traj - start);
    slots.assign(count, TrajectoryRecord{});
    errors.assign(count, std::string());
    std::atomic<int> cursor{0};
    auto work = [&]() {
      for (int i = cursor++; i < count; i = cursor++) {
        try {
          slots[i] = simulate_trajectory(spec, psi0, t_final, trajectory_seed(master_seed, start + i), opt.trajectory);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    };
    const int nw = std::min(opt.workers, count);
    if (nw == 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < nw; ++w) pool.emplace_back(work);
      for (auto& th : pool) th.join();
    }
    for (int i = 0; i < count; ++i)
      if (!errors[i].empty())
        throw ConvergenceError("trajectory " + std::to_string(start + i) + " (seed " +
                               std::to_string(trajectory_seed(master_seed, start + i)) + "): " + errors[i]);

    for (int i = 0; i < count; ++i) {
      const TrajectoryRecord& rec = slots[i];
      est.step = rec.step;
      est.max_top_population = std::max(est.max_top_population, rec.max_top_population);
      if (rec.truncation_flag) {
        ++est.n_discarded;
        continue;
      }
      if (sum_rho.empty()) {
        est.times = rec.sample_times;
        const std::size_t ns = est.times.size();
        sum_rho.assign(ns, DenseMat::Zero(d, d));
        sq_re.assign(ns, Eigen::MatrixXd::Zero(d, d));
        sq_im.assign(ns, Eigen::MatrixXd::Zero(d, d));
        for (std::size_t o = 0; o < obs_sum.size(); ++o) {
          obs_sum[o].assign(ns, 0.0);
          obs_sq[o].assign(ns, 0.0);
        }
      }
      for (std::size_t s = 0; s < rec.sample_states.size(); ++s) {
        const Vec& v = rec.sample_states[s];
        const DenseMat outer = v * v.adjoint();
        sum_rho[s] += outer;
        sq_re[s] += outer.real().cwiseAbs2();
        sq_im[s] += outer.imag().cwiseAbs2();
        for (std::size_t o = 0; o < obs_sum.size(); ++o) {
          const double x = v.dot(opt.observables[o].second.matrix() * v).real();
          obs_sum[o][s] += x;
          obs_sq[o][s] += x * x;
        }
      }
      const int b = static_cast<int>((static_cast<long long>(start + i) * batches) / n_traj);
      est.batch_final[b] += rec.sample_states.back() * rec.sample_states.back().adjoint();
      ++est.batch_counts[b];
      ++est.n_traj;
    }
  }

  const int total = est.n_traj + est.n_discarded;
  if (est.n_discarded > opt.max_discard_fraction * total)
    throw TruncationError(std::to_string(est.n_discarded) + " of " + std::to_string(total) +
                          " trajectories exceeded the truncation-health limit (max top-level population " +
                          std::to_string(est.max_top_population) + "); enlarge the Fock truncation");
  if (est.n_traj == 0) throw TruncationError("every trajectory was discarded");

  const double n = est.n_traj;
  auto stderr_of = [n](double s, double sq) {
    if (n < 2) return 0.0;
    const double var = std::max(0.0, (sq - s * s / n) / (n - 1.0));
    return std::sqrt(var / n);
  };
  for (std::size_t s = 0; s < sum_rho.size(); ++s) {
    est.rho.push_back(sum_rho[s] / n);
    Eigen::MatrixXd er(d, d), ei(d, d);
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) {
        er(i, j) = stderr_of(sum_rho[s](i, j).real(), sq_re[s](i, j));
        ei(i, j) = stderr_of(sum_rho[s](i, j).imag(), sq_im[s](i, j));
      }
    est.rho_stderr_re.push_back(std::move(er));
    est.rho_stderr_im.push_back(std::move(ei));
  }
  for (std::size_t o = 0; o < obs_sum.size(); ++o) {
    ObservableEstimate ob;
    ob.name = opt.observables[o].first;
    for (std::size_t s = 0; s < obs_sum[o].size(); ++s) {
      ob.mean.push_back(obs_sum[o][s] / n);
      ob.stderr_.push_back(stderr_of(obs_sum[o][s], obs_sq[o][s]));
    }
    est.observables.push_back(std::move(ob));
  }
  for (int b = 0; b < batches; ++b)
    if (est.batch_counts[b] > 0) est.batch_final[b] /= static_cast<double>(est.batch_counts[b]);
  return est;
}

/// Jackknife estimate of a scalar statistic of the final-time ensemble state,
/// built from the per-batch means.  Returns {full-sample value, standard error}.
template <class Stat>
std::pair<double, double> jackknife_final(const EnsembleEstimate& est, Stat&& stat) {
  const double full = stat(est.final_state());
  std::vector<int> used;
  for (std::size_t b = 0; b < est.batch_counts.size(); ++b)
    if (est.batch_counts[b] > 0) used.push_back(static_cast<int>(b));
  const int m = static_cast<int>(used.size());
  if (m < 2) return {full, 0.0};
  const int d = est.space.total_dim();
  std::vector<double> leave;
  for (int drop : used) {
    DenseMat acc = DenseMat::Zero(d, d);
    double cnt = 0.0;
    for (int b : used)
      if (b != drop) {
        acc += est.batch_final[b] * static_cast<double>(est.batch_counts[b]);
        cnt += est.batch_counts[b];
      }
    leave.push_back(stat(DensityMatrix::symmetrized(est.space, acc / cnt, {1e-10, 1e-9, -1e-6})));
  }
  double mean = 0.0;
  for (double v : leave) mean += v;
  mean /= m;
  double var = 0.0;
  for (double v : leave) var += (v - mean) * (v - mean);
  return {full, std::sqrt(var * (m - 1.0) / m)};
}

}  // namespace qfb
