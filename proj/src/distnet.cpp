#include "ebf/distnet.hpp"

#include "ebf/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ebf::net {

long NetworkTrace::messages() const {
  long n = 0;
  for (const auto& r : rows) n += r.messages;
  return n;
}

long NetworkTrace::scalars() const {
  long n = 0;
  for (const auto& r : rows) n += r.scalars;
  return n;
}

std::map<std::string, PhaseTotals> NetworkTrace::by_phase() const {
  std::map<std::string, PhaseTotals> out;
  for (const auto& r : rows) {
    auto& t = out[r.phase];
    ++t.rounds;
    t.messages += r.messages;
    t.scalars += r.scalars;
  }
  return out;
}

void NetworkTrace::write_csv(std::ostream& os) const {
  os << "round,phase,messages,scalars_sent\n";
  for (const auto& r : rows) {
    os << r.round << ',' << r.phase << ',' << r.messages << ',' << r.scalars << '\n';
  }
}

SpanningTree build_tree(const InteractionGraph& graph) {
  const int n = graph.n;
  if (n == 0) throw InvalidInput("cannot build a spanning tree over an empty graph");
  SpanningTree t;
  t.parent.assign(static_cast<std::size_t>(n), -1);
  t.children.assign(static_cast<std::size_t>(n), {});
  t.level.assign(static_cast<std::size_t>(n), -1);

  // Component labels double as the visited marker.
  std::vector<int> component(static_cast<std::size_t>(n), -1);
  int components = 0;
  for (int start = 0; start < n; ++start) {
    if (component[static_cast<std::size_t>(start)] >= 0) continue;
    std::deque<int> queue{start};
    component[static_cast<std::size_t>(start)] = components;
    if (components == 0) t.level[0] = 0;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int v : graph.neighbor_sets[static_cast<std::size_t>(u)]) {
        if (component[static_cast<std::size_t>(v)] >= 0) continue;
        component[static_cast<std::size_t>(v)] = components;
        if (components == 0) {
          t.parent[static_cast<std::size_t>(v)] = u;
          t.level[static_cast<std::size_t>(v)] = t.level[static_cast<std::size_t>(u)] + 1;
          t.children[static_cast<std::size_t>(u)].push_back(v);
          t.depth = std::max(t.depth, t.level[static_cast<std::size_t>(v)]);
        }
        queue.push_back(v);
      }
    }
    ++components;
  }
  if (components > 1) {
    std::ostringstream os;
    os << "interaction graph is disconnected (" << components << " components):";
    for (int c = 0; c < components; ++c) {
      os << " {";
      bool first = true;
      for (int i = 0; i < n; ++i) {
        if (component[static_cast<std::size_t>(i)] != c) continue;
        os << (first ? "" : ",") << (i + 1);
        first = false;
      }
      os << "}";
    }
    throw InvalidInput(os.str());
  }
  for (auto& c : t.children) std::sort(c.begin(), c.end());
  return t;
}

Network::Network(std::vector<Point> locations, const SufficientStats& stats,
                 const CompactKernel& kernel)
    : kernel_(kernel) {
  const int n = static_cast<int>(locations.size());
  if (stats.xbar.size() != n || stats.d_diag.size() != n) {
    throw InvalidInput("statistics do not match the number of locations");
  }
  graph_ = build_interaction_graph(locations, kernel_);
  try {
    tree_ = build_tree(graph_);
  } catch (const InvalidInput& e) {
    tree_error_ = e.what();
  }
  const SparseCovariance k_ss = cov_train(kernel_, locations);
  nodes_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& nd = nodes_[static_cast<std::size_t>(i)];
    nd.index = i;
    nd.location = locations[static_cast<std::size_t>(i)];
    nd.xbar = stats.xbar[i];
    nd.noise = stats.d_diag[i];
    nd.kernel_row.assign(k_ss.row(i).begin(), k_ss.row(i).end());
  }
}

const SpanningTree& Network::tree() const {
  if (!tree_error_.empty()) throw InvalidInput(tree_error_);
  return tree_;
}

std::vector<LocalRow> Network::covariance_rows() const {
  std::vector<LocalRow> rows(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    rows[i].shift = nodes_[i].noise;
    for (const auto& e : nodes_[i].kernel_row) rows[i].entries.push_back({e.col, e.value});
  }
  return rows;
}

bool Network::link_allowed(int from, int to) const {
  const int n = size();
  if (from == to) return false;
  if (from < n && to < n) return graph_.adjacent(from, to);
  const int sensor = from < n ? from : to;
  const int virt = from < n ? to : from;
  if (sensor >= n || virt - n >= static_cast<int>(virtual_peers_.size())) return false;
  const auto& peers = virtual_peers_[static_cast<std::size_t>(virt - n)];
  return std::binary_search(peers.begin(), peers.end(), sensor);
}

void Network::send(int from, int to, MessageKind kind, std::vector<double> payload) {
  if (!link_allowed(from, to)) {
    throw std::logic_error("message " + std::to_string(from) + " -> " + std::to_string(to) +
                           " does not follow an interaction edge");
  }
  outbox_.push_back({round_, from, to, kind, std::move(payload)});
}

std::vector<Message>& Network::inbox_of(int id) {
  if (id < size()) return nodes_[static_cast<std::size_t>(id)].inbox;
  return virtual_inboxes_.at(static_cast<std::size_t>(id - size()));
}

void Network::end_round(const std::string& phase) {
  if (outbox_.empty()) return;
  TraceRow row{round_, phase, 0, 0};
  for (auto& m : outbox_) {
    ++row.messages;
    row.scalars += static_cast<int>(m.payload.size());
    trace_.links.emplace(m.from, m.to);
    inbox_of(m.to).push_back(std::move(m));
  }
  outbox_.clear();
  trace_.rows.push_back(std::move(row));
  ++round_;
}

std::vector<Message> Network::take_inbox(int node) {
  std::vector<Message> msgs = std::move(inbox_of(node));
  inbox_of(node).clear();
  std::stable_sort(msgs.begin(), msgs.end(),
                   [](const Message& a, const Message& b) { return a.from < b.from; });
  return msgs;
}

int Network::add_virtual_node(std::vector<int> peers) {
  std::sort(peers.begin(), peers.end());
  virtual_peers_.push_back(std::move(peers));
  virtual_inboxes_.emplace_back();
  return size() + static_cast<int>(virtual_peers_.size()) - 1;
}

void Network::clear_virtual_nodes() {
  virtual_peers_.clear();
  virtual_inboxes_.clear();
}

std::vector<Vector> Network::allreduce_sum(const std::vector<Vector>& values,
                                           const std::string& phase) {
  const int n = size();
  if (static_cast<int>(values.size()) != n) throw InvalidInput("one value per node required");
  const SpanningTree& t = tree();
  std::vector<Vector> subtotal(values.begin(), values.end());

  // Up the tree, deepest level first; a node's subtotal is its own value
  // followed by its children's subtotals in ascending child id.
  for (int lvl = t.depth; lvl >= 1; --lvl) {
    for (int i = 0; i < n; ++i) {
      if (t.level[static_cast<std::size_t>(i)] != lvl) continue;
      for (const Message& m : take_inbox(i)) {
        subtotal[static_cast<std::size_t>(i)] += Eigen::Map<const Vector>(m.payload.data(), static_cast<Eigen::Index>(m.payload.size()));
      }
      const Vector& s = subtotal[static_cast<std::size_t>(i)];
      send(i, t.parent[static_cast<std::size_t>(i)], MessageKind::ReduceUp,
           std::vector<double>(s.data(), s.data() + s.size()));
    }
    end_round(phase);
  }
  for (const Message& m : take_inbox(0)) {
    subtotal[0] += Eigen::Map<const Vector>(m.payload.data(), static_cast<Eigen::Index>(m.payload.size()));
  }
  return broadcast(subtotal[0], phase);
}

std::vector<double> Network::allreduce_sum(const std::vector<double>& values,
                                           const std::string& phase) {
  std::vector<Vector> wrapped;
  wrapped.reserve(values.size());
  for (double v : values) wrapped.push_back(Vector::Constant(1, v));
  const auto reduced = allreduce_sum(wrapped, phase);
  std::vector<double> out;
  out.reserve(reduced.size());
  for (const auto& r : reduced) out.push_back(r[0]);
  return out;
}

std::vector<Vector> Network::broadcast(const Vector& root_value, const std::string& phase) {
  const int n = size();
  const SpanningTree& t = tree();
  std::vector<Vector> held(static_cast<std::size_t>(n));
  held[0] = root_value;
  for (int lvl = 0; lvl < t.depth; ++lvl) {
    for (int i = 0; i < n; ++i) {
      if (t.level[static_cast<std::size_t>(i)] != lvl) continue;
      const Vector& v = held[static_cast<std::size_t>(i)];
      for (int c : t.children[static_cast<std::size_t>(i)]) {
        send(i, c, MessageKind::BroadcastDown, std::vector<double>(v.data(), v.data() + v.size()));
      }
    }
    end_round(phase);
    for (int i = 0; i < n; ++i) {
      if (t.level[static_cast<std::size_t>(i)] != lvl + 1) continue;
      auto msgs = take_inbox(i);
      held[static_cast<std::size_t>(i)] =
          Eigen::Map<const Vector>(msgs.at(0).payload.data(), static_cast<Eigen::Index>(msgs.at(0).payload.size()));
    }
  }
  return held;
}

std::vector<double> Network::matvec(const std::vector<LocalRow>& rows, const std::vector<double>& v,
                                    const std::string& phase) {
  const int n = size();
  if (static_cast<int>(rows.size()) != n || static_cast<int>(v.size()) != n) {
    throw InvalidInput("matvec: one row and one value per node required");
  }
  for (int i = 0; i < n; ++i) {
    for (const auto& e : rows[static_cast<std::size_t>(i)].entries) {
      if (e.col != i) send(i, e.col, MessageKind::NeighborExchange, {v[static_cast<std::size_t>(i)]});
    }
  }
  end_round(phase);
  std::vector<double> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto msgs = take_inbox(i);
    const auto& row = rows[static_cast<std::size_t>(i)];
    double acc = row.shift * v[static_cast<std::size_t>(i)];
    for (const auto& e : row.entries) {
      double vj;
      if (e.col == i) {
        vj = v[static_cast<std::size_t>(i)];
      } else {
        const auto it = std::find_if(msgs.begin(), msgs.end(),
                                     [&](const Message& m) { return m.from == e.col; });
        if (it == msgs.end()) {
          throw std::logic_error("matvec: node " + std::to_string(i) + " missing value from " +
                                 std::to_string(e.col) + " (operator is not symmetric)");
        }
        vj = it->payload.at(0);
      }
      acc += e.value * vj;
    }
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

SolveResult Network::solve(const std::vector<LocalRow>& rows, const std::vector<double>& rhs,
                           const CgSettings& settings, const std::string& phase) {
  const int n = size();
  if (static_cast<int>(rhs.size()) != n) throw InvalidInput("solve: one rhs entry per node");
  const int max_iters = settings.max_iters > 0 ? settings.max_iters : 5 * n;
  const auto un = static_cast<std::size_t>(n);

  SolveResult res;
  res.x.assign(un, 0.0);
  std::vector<double> r = rhs, p = rhs, sq(un);
  for (std::size_t i = 0; i < un; ++i) sq[i] = r[i] * r[i];
  // Every node holds bit-identical copies of the reduced scalars, so the
  // stopping decision below is taken consistently everywhere; node 0's copy
  // stands for all of them.
  double rr = allreduce_sum(sq, phase + ":dot")[0];
  const double threshold = settings.tol * std::sqrt(rr);
  res.residual_history.push_back(std::sqrt(rr));
  if (rr == 0.0) return res;

  std::vector<double> prod(un);
  while (res.iterations < max_iters) {
    const auto ap = matvec(rows, p, phase + ":matvec");
    for (std::size_t i = 0; i < un; ++i) prod[i] = p[i] * ap[i];
    const double pap = allreduce_sum(prod, phase + ":dot")[0];
    if (!(pap > 0.0)) {
      throw SolverError("distributed CG (" + phase + "): operator is not positive definite");
    }
    const double alpha = rr / pap;
    for (std::size_t i = 0; i < un; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      sq[i] = r[i] * r[i];
    }
    const double rr_new = allreduce_sum(sq, phase + ":dot")[0];
    ++res.iterations;
    res.residual_history.push_back(std::sqrt(rr_new));
    if (std::sqrt(rr_new) <= threshold) return res;
    const double beta = rr_new / rr;
    for (std::size_t i = 0; i < un; ++i) p[i] = r[i] + beta * p[i];
    rr = rr_new;
  }
  std::ostringstream os;
  os << "distributed CG (" << phase << ") did not converge in " << max_iters
     << " iterations; residual history:";
  for (double h : res.residual_history) os << ' ' << h;
  throw SolverError(os.str());
}

namespace {

class NetworkModel final : public GaussNewtonModel {
 public:
  NetworkModel(Network& net, const SpatialDynamics& dyn, const DistributedSettings& dist)
      : net_(net), dyn_(dyn), dist_(dist), cov_rows_(net.covariance_rows()) {
    net.tree();  // fails early on a disconnected graph
    if (!dyn.explicit_mean()) {
      for (int i = 0; i < net.size(); ++i) {
        LocalRow row;
        row.entries = dyn.system_row(i);
        for (const auto& e : row.entries) {
          if (e.col != i && !net.graph().adjacent(i, e.col)) {
            throw InvalidInput("dynamics couples nodes " + std::to_string(i + 1) + " and " +
                               std::to_string(e.col + 1) +
                               " which are not interaction-graph neighbors");
          }
        }
        dyn_rows_.push_back(std::move(row));
      }
    }
  }

  double evaluate(const Vector& gamma) override {
    const int n = net_.size();
    const auto un = static_cast<std::size_t>(n);
    const auto held = net_.broadcast(gamma, "gamma-broadcast");
    for (int i = 0; i < n; ++i) net_.node(i).trial_gamma = held[static_cast<std::size_t>(i)];

    // Mean at the measurement points.
    std::vector<double> mu(un);
    if (dyn_.explicit_mean()) {
      for (int i = 0; i < n; ++i) mu[static_cast<std::size_t>(i)] = dyn_.local_mean(i, net_.node(i).trial_gamma);
    } else {
      std::vector<double> rhs(un);
      for (int i = 0; i < n; ++i) rhs[static_cast<std::size_t>(i)] = dyn_.system_rhs(i, net_.node(i).trial_gamma);
      mu = net_.solve(dyn_rows_, rhs, dist_.dynamics_cg, "mean-solve").x;
    }

    // (K_ss + D) z = mu - xbar.
    std::vector<double> resid(un);
    for (int i = 0; i < n; ++i) {
      auto& nd = net_.node(i);
      nd.trial_mu = mu[static_cast<std::size_t>(i)];
      resid[static_cast<std::size_t>(i)] = nd.trial_mu - nd.xbar;
    }
    const auto z = net_.solve(cov_rows_, resid, dist_.covariance_cg, "z-solve").x;

    // Separable cost sum_i f_i(z) with f_i = z_i [(K_ss + D) z]_i.
    const auto kz = net_.matvec(cov_rows_, z, "cost-exchange");
    std::vector<double> local_cost(un);
    for (int i = 0; i < n; ++i) {
      net_.node(i).trial_z = z[static_cast<std::size_t>(i)];
      local_cost[static_cast<std::size_t>(i)] = z[static_cast<std::size_t>(i)] * kz[static_cast<std::size_t>(i)];
    }
    return net_.allreduce_sum(local_cost, "cost-reduce")[0];
  }

  void commit() override {
    const auto held = net_.broadcast(Vector::Ones(1), "commit-broadcast");
    for (int i = 0; i < net_.size(); ++i) {
      if (held[static_cast<std::size_t>(i)][0] != 1.0) continue;
      auto& nd = net_.node(i);
      nd.gamma = nd.trial_gamma;
      nd.mu = nd.trial_mu;
      nd.z = nd.trial_z;
    }
  }

  void linearize(Vector& gradient, Matrix& gn_matrix) override {
    const int n = net_.size();
    const auto un = static_cast<std::size_t>(n);
    const int p = dyn_.num_params();

    // Rows of d mu / d gamma, one per node.
    if (dyn_.explicit_mean()) {
      for (int i = 0; i < n; ++i) {
        net_.node(i).mean_gradient = dyn_.local_mean_gradient(i, net_.node(i).gamma);
      }
    } else {
      for (int i = 0; i < n; ++i) net_.node(i).mean_gradient = Vector::Zero(p);
      for (int k = 0; k < p; ++k) {
        std::vector<double> rhs(un);
        for (int i = 0; i < n; ++i) {
          rhs[static_cast<std::size_t>(i)] = dyn_.system_rhs_gradient(i, net_.node(i).gamma)[k];
        }
        const auto col = net_.solve(dyn_rows_, rhs, dist_.dynamics_cg, "jacobian-solve").x;
        for (int i = 0; i < n; ++i) net_.node(i).mean_gradient[k] = col[static_cast<std::size_t>(i)];
      }
    }

    std::vector<Vector> local_grad(un);
    for (int i = 0; i < n; ++i) {
      const auto& nd = net_.node(i);
      local_grad[static_cast<std::size_t>(i)] = 2.0 * nd.z * nd.mean_gradient;
    }
    gradient = net_.allreduce_sum(local_grad, "gradient-reduce")[0];

    // Column l of J^T (K + D)^{-1} J from one solve and one reduction.
    gn_matrix.resize(p, p);
    for (int l = 0; l < p; ++l) {
      std::vector<double> rhs(un);
      for (int i = 0; i < n; ++i) rhs[static_cast<std::size_t>(i)] = net_.node(i).mean_gradient[l];
      const auto y = net_.solve(cov_rows_, rhs, dist_.covariance_cg, "gn-solve").x;
      std::vector<Vector> contrib(un);
      for (int i = 0; i < n; ++i) {
        contrib[static_cast<std::size_t>(i)] = net_.node(i).mean_gradient * y[static_cast<std::size_t>(i)];
      }
      gn_matrix.col(l) = net_.allreduce_sum(contrib, "gn-reduce")[0];
    }
  }

 private:
  Network& net_;
  const SpatialDynamics& dyn_;
  DistributedSettings dist_;
  std::vector<LocalRow> cov_rows_;
  std::vector<LocalRow> dyn_rows_;
};

}  // namespace

DistributedFit distributed_fit_ml(Network& network, const SpatialDynamics& dynamics,
                                  const Hyperparameters& init, const SolverSettings& settings,
                                  const DistributedSettings& dist) {
  if (dynamics.size() != network.size()) throw InvalidInput("dynamics do not match the network");
  if (init.values.size() != dynamics.num_params()) {
    throw InvalidInput("initial hyperparameters have the wrong length");
  }
  if (!init.domain.contains(init.values)) {
    throw InvalidInput("initial hyperparameters lie outside their domain");
  }
  const std::size_t first_row = network.trace().rows.size();
  NetworkModel model(network, dynamics, dist);
  GaussNewtonOutcome gn = gauss_newton(model, init, settings);

  DistributedFit out;
  out.ml.gamma_ml = {gn.gamma, init.domain};
  const int n = network.size();
  out.ml.z.resize(n);
  out.ml.mu_gamma.resize(n);
  for (int i = 0; i < n; ++i) {
    out.ml.z[i] = network.node(i).z;
    out.ml.mu_gamma[i] = network.node(i).mu;
  }
  out.ml.cost = gn.cost;
  out.ml.iterations = gn.iterations;
  out.ml.converged = gn.converged;
  out.ml.diagnostics = std::move(gn.diagnostics);
  const auto& rows = network.trace().rows;
  out.trace.rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(first_row), rows.end());
  out.trace.links = network.trace().links;
  return out;
}

DistributedFit distributed_fit_ml_multistart(Network& network, const SpatialDynamics& dynamics,
                                             const Hyperparameters& init,
                                             const SolverSettings& settings,
                                             const DistributedSettings& dist) {
  const std::size_t first_row = network.trace().rows.size();
  std::vector<Vector> starts{init.values};
  if (!dynamics.linear_in_params()) starts = start_points(init, settings);
  DistributedFit best;
  bool have = false;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    DistributedFit r = distributed_fit_ml(network, dynamics, {starts[s], init.domain}, settings, dist);
    if (!have || r.ml.cost < best.ml.cost) {
      best = std::move(r);
      best.ml.diagnostics.best_start = static_cast<int>(s);
      have = true;
    }
  }
  const auto& rows = network.trace().rows;
  best.trace.rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(first_row), rows.end());
  best.trace.links = network.trace().links;
  return best;
}

namespace {

std::vector<int> support_of(const Network& net, const Point& p) {
  std::vector<int> out;
  for (int j = 0; j < net.size(); ++j) {
    if (net.kernel().in_support(p, net.node(j).location)) out.push_back(j);
  }
  return out;
}

}  // namespace

double local_map(Network& network, const SpatialDynamics& dynamics, const RegressionGrid& grid,
                 int m, std::optional<int> host) {
  const Point& point = grid.points.at(static_cast<std::size_t>(m));
  const std::vector<int> effective = support_of(network, point);
  const std::vector<int> mean_support = dynamics.regression_support(grid, m);

  int query;
  if (host) {
    query = *host;
    if (query < 0 || query >= network.size()) throw InvalidInput("host node out of range");
    for (int j : effective) {
      if (j != query && !network.graph().adjacent(query, j)) {
        throw InvalidInput("node " + std::to_string(j + 1) + " in N^E of regression point " +
                           std::to_string(m + 1) + " is not a neighbor of host node " +
                           std::to_string(query + 1));
      }
    }
    for (int j : mean_support) {
      if (j != query && !network.graph().adjacent(query, j)) {
        throw InvalidInput("mean support node " + std::to_string(j + 1) +
                           " is not a neighbor of host node " + std::to_string(query + 1));
      }
    }
  } else {
    for (int j : mean_support) {
      if (!std::binary_search(effective.begin(), effective.end(), j)) {
        throw InvalidInput("regression point " + std::to_string(m + 1) +
                           " is out of kernel range of mean support node " + std::to_string(j + 1));
      }
    }
    query = network.add_virtual_node(effective);
  }

  // Prior mean: implicit dynamics need the mean at neighboring nodes.
  std::vector<double> support_mu(mean_support.size());
  if (!mean_support.empty()) {
    for (int j : mean_support) {
      if (j != query) network.send(j, query, MessageKind::NeighborExchange, {network.node(j).mu});
    }
    network.end_round("map-mean");
    const auto msgs = network.take_inbox(query);
    for (std::size_t k = 0; k < mean_support.size(); ++k) {
      const int j = mean_support[k];
      if (j == query) {
        support_mu[k] = network.node(j).mu;
        continue;
      }
      const auto it = std::find_if(msgs.begin(), msgs.end(), [&](const Message& msg) { return msg.from == j; });
      support_mu[k] = it->payload.at(0);
    }
  }
  const Vector& gamma = host ? network.node(query).gamma : network.node(0).gamma;
  const double prior = dynamics.regression_mean_at(grid, m, gamma, support_mu);

  for (int j : effective) {
    if (j != query) network.send(j, query, MessageKind::NeighborExchange, {network.node(j).z});
  }
  network.end_round("map-z");
  const auto msgs = network.take_inbox(query);
  double correction = 0.0;
  for (int j : effective) {
    double zj;
    if (j == query) {
      zj = network.node(j).z;
    } else {
      const auto it = std::find_if(msgs.begin(), msgs.end(), [&](const Message& msg) { return msg.from == j; });
      zj = it->payload.at(0);
    }
    correction += network.kernel()(point, network.node(j).location) * zj;
  }
  if (!host) network.clear_virtual_nodes();
  return prior - correction;
}

double local_variance(Network& network, const RegressionGrid& grid, int m,
                      const CgSettings& settings) {
  const Point& point = grid.points.at(static_cast<std::size_t>(m));
  const double prior = network.kernel()(point, point);
  const std::vector<int> effective = support_of(network, point);
  if (effective.empty()) return prior;

  const auto un = static_cast<std::size_t>(network.size());
  std::vector<double> rhs(un, 0.0);
  for (int j : effective) rhs[static_cast<std::size_t>(j)] = network.kernel()(point, network.node(j).location);
  const auto y = network.solve(network.covariance_rows(), rhs, settings, "var-solve").x;

  const int query = network.add_virtual_node(effective);
  for (int j : effective) {
    network.send(j, query, MessageKind::NeighborExchange, {y[static_cast<std::size_t>(j)]});
  }
  network.end_round("var-gather");
  const auto msgs = network.take_inbox(query);
  double reduction = 0.0;
  for (int j : effective) {
    const auto it = std::find_if(msgs.begin(), msgs.end(), [&](const Message& msg) { return msg.from == j; });
    reduction += rhs[static_cast<std::size_t>(j)] * it->payload.at(0);
  }
  network.clear_virtual_nodes();
  return prior - reduction;
}

}  // namespace ebf::net
