#ifndef KACSPHERE_TRANSPORT_HPP
#define KACSPHERE_TRANSPORT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "core/error.hpp"

namespace kacsphere {

/// Primal network simplex for the uncapacitated transportation problem
/// min sum c_ij x_ij subject to sum_j x_ij = a_i, sum_i x_ij = b_j, x >= 0.
/// Spanning-tree bookkeeping follows the thread/successor representation with an
/// artificial root; entering arcs are chosen by block search.
class TransportSimplex {
 public:
  /// cost is row-major n x m. Supplies and demands must have equal totals.
  TransportSimplex(std::span<const double> supply, std::span<const double> demand, std::span<const double> cost)
      : n_(int(supply.size())), m_(int(demand.size())) {
    if (n_ == 0 || m_ == 0) throw ParameterError("transport problem needs nonempty sides");
    if (cost.size() != std::size_t(n_) * std::size_t(m_)) throw ShapeError("cost matrix must be n x m");
    node_num_ = n_ + m_;
    arc_num_ = n_ * m_;
    const int all = arc_num_ + node_num_;
    source_.resize(std::size_t(all));
    target_.resize(std::size_t(all));
    cost_.resize(std::size_t(all));
    flow_.assign(std::size_t(all), 0.0);
    state_.assign(std::size_t(all), 1);
    double max_cost = 0.0;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < m_; ++j) {
        const int e = i * m_ + j;
        source_[std::size_t(e)] = i;
        target_[std::size_t(e)] = n_ + j;
        cost_[std::size_t(e)] = cost[std::size_t(e)];
        if (!(cost[std::size_t(e)] >= 0.0) || !std::isfinite(cost[std::size_t(e)]))
          throw ParameterError("costs must be finite and nonnegative");
        max_cost = std::max(max_cost, cost[std::size_t(e)]);
      }
    supply_.resize(std::size_t(node_num_ + 1));
    double total = 0.0, scale = 0.0;
    for (int i = 0; i < n_; ++i) {
      supply_[std::size_t(i)] = supply[std::size_t(i)];
      total += supply[std::size_t(i)];
      scale += std::abs(supply[std::size_t(i)]);
    }
    for (int j = 0; j < m_; ++j) {
      supply_[std::size_t(n_ + j)] = -demand[std::size_t(j)];
      total -= demand[std::size_t(j)];
      scale += std::abs(demand[std::size_t(j)]);
    }
    for (double s : supply_)
      if (!std::isfinite(s)) throw ParameterError("supplies must be finite");
    if (std::abs(total) > 1e-9 * std::max(1.0, scale)) throw ParameterError("supply and demand totals differ");
    scale_ = std::max(1.0, scale);
    cost_eps_ = 1e-12 * std::max(1.0, max_cost);
    art_cost_ = (max_cost + 1.0) * double(node_num_);
    init();
    solve();
  }

  /// Optimal objective value.
  double objective() const {
    double acc = 0.0;
    for (int e = 0; e < arc_num_; ++e) acc += flow_[std::size_t(e)] * cost_[std::size_t(e)];
    return acc;
  }
  double flow(int i, int j) const { return flow_[std::size_t(i * m_ + j)]; }
  std::size_t pivots() const { return pivots_; }

 private:
  static constexpr int lower = 1, tree = 0;
  static constexpr int up = 1, down = -1;

  double reduced(int e) const {
    return cost_[std::size_t(e)] + pi_[std::size_t(source_[std::size_t(e)])] - pi_[std::size_t(target_[std::size_t(e)])];
  }

  void init() {
    const auto nn = std::size_t(node_num_ + 1);
    parent_.assign(nn, -1);
    pred_.assign(nn, -1);
    pred_dir_.assign(nn, 0);
    thread_.assign(nn, 0);
    rev_thread_.assign(nn, 0);
    succ_num_.assign(nn, 0);
    last_succ_.assign(nn, 0);
    pi_.assign(nn, 0.0);
    root_ = node_num_;
    parent_[std::size_t(root_)] = -1;
    pred_[std::size_t(root_)] = -1;
    thread_[std::size_t(root_)] = 0;
    rev_thread_[0] = root_;
    succ_num_[std::size_t(root_)] = node_num_ + 1;
    last_succ_[std::size_t(root_)] = root_ - 1;
    for (int u = 0, e = arc_num_; u != node_num_; ++u, ++e) {
      const auto U = std::size_t(u), E = std::size_t(e);
      parent_[U] = root_;
      pred_[U] = e;
      thread_[U] = u + 1;
      rev_thread_[std::size_t(u + 1)] = u;
      succ_num_[U] = 1;
      last_succ_[U] = u;
      state_[E] = tree;
      if (supply_[U] >= 0.0) {
        pred_dir_[U] = up;
        pi_[U] = 0.0;
        source_[E] = u;
        target_[E] = root_;
        flow_[E] = supply_[U];
        cost_[E] = 0.0;
      } else {
        pred_dir_[U] = down;
        pi_[U] = art_cost_;
        source_[E] = root_;
        target_[E] = u;
        flow_[E] = -supply_[U];
        cost_[E] = art_cost_;
      }
    }
    block_ = std::max(10, int(std::sqrt(double(arc_num_))));
    next_arc_ = 0;
  }

  bool find_entering_arc() {
    double min = 0.0;
    int cnt = block_;
    int e;
    for (e = next_arc_; e != arc_num_; ++e) {
      const double c = state_[std::size_t(e)] * reduced(e);
      if (c < min) {
        min = c;
        in_arc_ = e;
      }
      if (--cnt == 0) {
        if (min < -cost_eps_) goto found;
        cnt = block_;
      }
    }
    for (e = 0; e != next_arc_; ++e) {
      const double c = state_[std::size_t(e)] * reduced(e);
      if (c < min) {
        min = c;
        in_arc_ = e;
      }
      if (--cnt == 0) {
        if (min < -cost_eps_) goto found;
        cnt = block_;
      }
    }
    if (!(min < -cost_eps_)) return false;
  found:
    next_arc_ = e == arc_num_ ? 0 : e;
    return true;
  }

  void find_join_node() {
    int u = source_[std::size_t(in_arc_)], v = target_[std::size_t(in_arc_)];
    while (u != v) {
      if (succ_num_[std::size_t(u)] < succ_num_[std::size_t(v)]) u = parent_[std::size_t(u)];
      else v = parent_[std::size_t(v)];
    }
    join_ = u;
  }

  bool find_leaving_arc() {
    int first, second;
    if (state_[std::size_t(in_arc_)] == lower) {
      first = source_[std::size_t(in_arc_)];
      second = target_[std::size_t(in_arc_)];
    } else {
      first = target_[std::size_t(in_arc_)];
      second = source_[std::size_t(in_arc_)];
    }
    delta_ = std::numeric_limits<double>::infinity();
    int result = 0;
    for (int u = first; u != join_; u = parent_[std::size_t(u)]) {
      if (pred_dir_[std::size_t(u)] == down) continue;
      const double d = flow_[std::size_t(pred_[std::size_t(u)])];
      if (d < delta_) {
        delta_ = d;
        u_out_ = u;
        result = 1;
      }
    }
    for (int u = second; u != join_; u = parent_[std::size_t(u)]) {
      if (pred_dir_[std::size_t(u)] == up) continue;
      const double d = flow_[std::size_t(pred_[std::size_t(u)])];
      if (d <= delta_) {
        delta_ = d;
        u_out_ = u;
        result = 2;
      }
    }
    if (result == 1) {
      u_in_ = first;
      v_in_ = second;
    } else {
      u_in_ = second;
      v_in_ = first;
    }
    return result != 0;
  }

  void change_flow() {
    if (delta_ > 0.0) {
      const double val = state_[std::size_t(in_arc_)] * delta_;
      flow_[std::size_t(in_arc_)] += val;
      for (int u = source_[std::size_t(in_arc_)]; u != join_; u = parent_[std::size_t(u)])
        flow_[std::size_t(pred_[std::size_t(u)])] -= pred_dir_[std::size_t(u)] * val;
      for (int u = target_[std::size_t(in_arc_)]; u != join_; u = parent_[std::size_t(u)])
        flow_[std::size_t(pred_[std::size_t(u)])] += pred_dir_[std::size_t(u)] * val;
    }
    const int out = pred_[std::size_t(u_out_)];
    flow_[std::size_t(out)] = 0.0;
    state_[std::size_t(in_arc_)] = tree;
    state_[std::size_t(out)] = lower;
  }

  void update_tree_structure() {
    auto P = [&](int u) -> int& { return parent_[std::size_t(u)]; };
    auto T = [&](int u) -> int& { return thread_[std::size_t(u)]; };
    auto R = [&](int u) -> int& { return rev_thread_[std::size_t(u)]; };
    auto S = [&](int u) -> int& { return succ_num_[std::size_t(u)]; };
    auto L = [&](int u) -> int& { return last_succ_[std::size_t(u)]; };
    const int old_rev_thread = R(u_out_);
    const int old_succ_num = S(u_out_);
    const int old_last_succ = L(u_out_);
    v_out_ = P(u_out_);

    if (u_in_ == u_out_) {
      P(u_in_) = v_in_;
      pred_[std::size_t(u_in_)] = in_arc_;
      pred_dir_[std::size_t(u_in_)] = u_in_ == source_[std::size_t(in_arc_)] ? up : down;
      if (T(v_in_) != u_out_) {
        int after = T(old_last_succ);
        T(old_rev_thread) = after;
        R(after) = old_rev_thread;
        after = T(v_in_);
        T(v_in_) = u_out_;
        R(u_out_) = v_in_;
        T(old_last_succ) = after;
        R(after) = old_last_succ;
      }
    } else {
      const int thread_continue = old_rev_thread == v_in_ ? T(old_last_succ) : T(v_in_);
      int stem = u_in_, par_stem = v_in_, next_stem;
      int last = L(u_in_);
      int before, after = T(last);
      T(v_in_) = u_in_;
      dirty_revs_.clear();
      dirty_revs_.push_back(v_in_);
      while (stem != u_out_) {
        next_stem = P(stem);
        T(last) = next_stem;
        dirty_revs_.push_back(last);
        before = R(stem);
        T(before) = after;
        R(after) = before;
        P(stem) = par_stem;
        par_stem = stem;
        stem = next_stem;
        last = L(stem) == L(par_stem) ? R(par_stem) : L(stem);
        after = T(last);
      }
      P(u_out_) = par_stem;
      T(last) = thread_continue;
      R(thread_continue) = last;
      L(u_out_) = last;
      if (old_rev_thread != v_in_) {
        T(old_rev_thread) = after;
        R(after) = old_rev_thread;
      }
      for (int u : dirty_revs_) R(T(u)) = u;
      int tmp_sc = 0, tmp_ls = L(u_out_);
      for (int u = u_out_, p = P(u); u != u_in_; u = p, p = P(u)) {
        pred_[std::size_t(u)] = pred_[std::size_t(p)];
        pred_dir_[std::size_t(u)] = -pred_dir_[std::size_t(p)];
        tmp_sc += S(u) - S(p);
        S(u) = tmp_sc;
        L(p) = tmp_ls;
      }
      pred_[std::size_t(u_in_)] = in_arc_;
      pred_dir_[std::size_t(u_in_)] = u_in_ == source_[std::size_t(in_arc_)] ? up : down;
      S(u_in_) = old_succ_num;
    }

    const int up_limit_out = L(join_) == v_in_ ? join_ : -1;
    const int last_succ_out = L(u_out_);
    for (int u = v_in_; u != -1 && L(u) == v_in_; u = P(u)) L(u) = last_succ_out;
    if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
      for (int u = v_out_; u != up_limit_out && L(u) == old_last_succ; u = P(u)) L(u) = old_rev_thread;
    } else if (last_succ_out != old_last_succ) {
      for (int u = v_out_; u != up_limit_out && L(u) == old_last_succ; u = P(u)) L(u) = last_succ_out;
    }
    for (int u = v_in_; u != join_; u = P(u)) S(u) += old_succ_num;
    for (int u = v_out_; u != join_; u = P(u)) S(u) -= old_succ_num;
  }

  void update_potential() {
    const double sigma =
        pi_[std::size_t(v_in_)] - pi_[std::size_t(u_in_)] - pred_dir_[std::size_t(u_in_)] * cost_[std::size_t(in_arc_)];
    const int end = thread_[std::size_t(last_succ_[std::size_t(u_in_)])];
    for (int u = u_in_; u != end; u = thread_[std::size_t(u)]) pi_[std::size_t(u)] += sigma;
  }

  void solve() {
    const std::size_t limit = std::size_t(50) * std::size_t(arc_num_ + node_num_) + 1000000;
    while (find_entering_arc()) {
      find_join_node();
      if (!find_leaving_arc()) throw Error("transport problem is unbounded");
      change_flow();
      update_tree_structure();
      update_potential();
      if (++pivots_ > limit) throw Error("network simplex did not converge");
    }
    for (int e = arc_num_; e < arc_num_ + node_num_; ++e)
      if (flow_[std::size_t(e)] > 1e-9 * scale_) throw Error("transport problem is infeasible");
  }

  int n_, m_, node_num_ = 0, arc_num_ = 0, root_ = 0;
  std::vector<int> source_, target_, state_;
  std::vector<double> cost_, flow_, supply_, pi_;
  std::vector<int> parent_, pred_, pred_dir_, thread_, rev_thread_, succ_num_, last_succ_, dirty_revs_;
  int block_ = 0, next_arc_ = 0;
  int in_arc_ = 0, join_ = 0, u_in_ = 0, v_in_ = 0, u_out_ = 0, v_out_ = 0;
  double delta_ = 0.0, art_cost_ = 0.0, scale_ = 1.0, cost_eps_ = 0.0;
  std::size_t pivots_ = 0;
};

}  // namespace kacsphere

#endif
