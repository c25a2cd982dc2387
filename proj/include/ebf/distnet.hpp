#pragma once

#include "ebf/dynamics.hpp"
#include "ebf/estimator.hpp"
#include "ebf/kernel.hpp"
#include "ebf/model.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

/// Synchronous message-passing simulation of the estimator. Every node holds
/// only its own statistics, its kernel row and its own iterates; all
/// coupling goes through messages along interaction-graph edges.
namespace ebf::net {

enum class MessageKind { NeighborExchange, ReduceUp, BroadcastDown };

struct Message {
  int round = 0;
  int from = 0;
  int to = 0;
  MessageKind kind = MessageKind::NeighborExchange;
  std::vector<double> payload;
};

struct TraceRow {
  int round = 0;
  std::string phase;
  int messages = 0;
  int scalars = 0;
};

struct PhaseTotals {
  int rounds = 0;
  long messages = 0;
  long scalars = 0;
};

struct NetworkTrace {
  std::vector<TraceRow> rows;
  std::set<std::pair<int, int>> links;  // every (from, to) pair used

  int rounds() const noexcept { return static_cast<int>(rows.size()); }
  long messages() const;
  long scalars() const;
  std::map<std::string, PhaseTotals> by_phase() const;

  /// Header `round,phase,messages,scalars_sent`, one row per round.
  void write_csv(std::ostream& os) const;
};

/// BFS tree rooted at node 0 (sensor id 1), lowest id explored first.
struct SpanningTree {
  std::vector<int> parent;                 // -1 at the root
  std::vector<std::vector<int>> children;  // ascending
  std::vector<int> level;
  int depth = 0;

  int size() const noexcept { return static_cast<int>(parent.size()); }
};

/// Throws InvalidInput naming the components when the graph is disconnected.
SpanningTree build_tree(const InteractionGraph& graph);

/// Row i of a sparse symmetric operator as known to node i; y_i is
/// shift_i v_i plus the row entries in ascending column order.
struct LocalRow {
  double shift = 0.0;
  std::vector<SystemEntry> entries;
};

struct SolveResult {
  std::vector<double> x;         // entry i lives at node i
  int iterations = 0;
  std::vector<double> residual_history;  // ||r_k|| after each iteration, r_0 first
};

struct CgSettings {
  double tol = 1e-10;  // relative to ||rhs||
  int max_iters = 0;   // 0 means 5 N
};

struct NodeState {
  int index = 0;
  Point location;
  double xbar = 0.0;
  double noise = 0.0;                          // sigma^2 / L_i
  std::vector<SparseCovariance::Entry> kernel_row;  // includes the node itself
  std::vector<Message> inbox;

  Vector gamma;   // replicated hyperparameters
  double mu = 0.0;
  double z = 0.0;
  Vector mean_gradient;  // row i of d mu / d gamma
  // Values for the last trial point of a line search.
  Vector trial_gamma;
  double trial_mu = 0.0;
  double trial_z = 0.0;
};

class Network {
 public:
  Network(std::vector<Point> locations, const SufficientStats& stats, const CompactKernel& kernel);

  int size() const noexcept { return static_cast<int>(nodes_.size()); }
  const InteractionGraph& graph() const noexcept { return graph_; }
  /// Throws InvalidInput when the interaction graph is disconnected; only
  /// tree-based patterns (reductions, broadcasts) need it.
  const SpanningTree& tree() const;
  const CompactKernel& kernel() const noexcept { return kernel_; }
  const NodeState& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  NodeState& node(int i) { return nodes_.at(static_cast<std::size_t>(i)); }
  const NetworkTrace& trace() const noexcept { return trace_; }
  void clear_trace() { trace_ = {}; }

  /// Rows of K_ss + D, one per node.
  std::vector<LocalRow> covariance_rows() const;

  // Primitive communication patterns.

  /// Every node ends up with the network-wide sum of `values` (fixed
  /// width per node). Costs 2 (N - 1) messages.
  std::vector<Vector> allreduce_sum(const std::vector<Vector>& values, const std::string& phase);
  /// Scalar convenience form.
  std::vector<double> allreduce_sum(const std::vector<double>& values, const std::string& phase);

  /// Root value delivered to every node down the tree.
  std::vector<Vector> broadcast(const Vector& root_value, const std::string& phase);

  /// One neighbor-exchange round computing the operator applied to v.
  std::vector<double> matvec(const std::vector<LocalRow>& rows, const std::vector<double>& v,
                             const std::string& phase);

  /// Conjugate gradient on a symmetric positive definite operator. Throws
  /// SolverError with the residual history when it does not converge.
  SolveResult solve(const std::vector<LocalRow>& rows, const std::vector<double>& rhs,
                    const CgSettings& settings, const std::string& phase);

  // Raw messaging, used by the patterns above and by the estimator phases.

  /// Queues a message; throws std::logic_error when (from, to) is not an
  /// interaction-graph edge. Ids >= size() denote virtual query nodes.
  void send(int from, int to, MessageKind kind, std::vector<double> payload);
  /// Delivers all queued messages and records one trace row.
  void end_round(const std::string& phase);
  std::vector<Message> take_inbox(int node);

  /// Registers a virtual node (a regression point) whose legal peers are
  /// `peers`; returns its id.
  int add_virtual_node(std::vector<int> peers);
  void clear_virtual_nodes();

 private:
  bool link_allowed(int from, int to) const;
  std::vector<Message>& inbox_of(int id);

  CompactKernel kernel_;
  InteractionGraph graph_;
  SpanningTree tree_;
  std::string tree_error_;  // set when the graph is disconnected
  std::vector<NodeState> nodes_;
  std::vector<std::vector<int>> virtual_peers_;
  std::vector<std::vector<Message>> virtual_inboxes_;
  std::vector<Message> outbox_;
  int round_ = 0;
  NetworkTrace trace_;
};

struct DistributedFit {
  MLResult ml;
  NetworkTrace trace;  // messages of this fit only
};

struct DistributedSettings {
  CgSettings covariance_cg{1e-13, 0};
  CgSettings dynamics_cg{1e-13, 0};
};

/// Gauss-Newton on the partitioned ML problem: each outer iteration the
/// nodes compute mu, solve for z and the Jacobian columns with distributed
/// CG, reduce the gradient and Gauss-Newton matrix up the tree; the root
/// chooses the step and broadcasts the new gamma.
DistributedFit distributed_fit_ml(Network& network, const SpatialDynamics& dynamics,
                                  const Hyperparameters& init, const SolverSettings& settings,
                                  const DistributedSettings& dist = {});

/// Same start points and selection rule as fit_ml_multistart.
DistributedFit distributed_fit_ml_multistart(Network& network, const SpatialDynamics& dynamics,
                                             const Hyperparameters& init,
                                             const SolverSettings& settings,
                                             const DistributedSettings& dist = {});

/// MAP value at grid point m computed by a query node: a virtual node at
/// s^R_m when `host` is empty, otherwise the given sensor. z_j is fetched
/// from every j in N^E_m (one scalar each); implicit dynamics also fetch the
/// mean values the regression mean depends on. Throws InvalidInput when a
/// required node is not a neighbor of the querying node.
double local_map(Network& network, const SpatialDynamics& dynamics, const RegressionGrid& grid,
                 int m, std::optional<int> host = std::nullopt);

/// Posterior variance at grid point m: distributed CG on (K_ss + D) y = k_m,
/// then the virtual node gathers y_j from N^E_m.
double local_variance(Network& network, const RegressionGrid& grid, int m,
                      const CgSettings& settings = {1e-13, 0});

}  // namespace ebf::net
