#ifndef NGM_GRAPH_HPP
#define NGM_GRAPH_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ngm {

enum class EdgeKind { Directed, Undirected };

struct Edge {
  std::string source;
  std::string target;
  EdgeKind kind = EdgeKind::Undirected;
  std::optional<char> sign;      // '+' or '-'
  std::optional<double> weight;  // magnitude, when known
};

// Feature dependency graph. Immutable after construction; directed parts must
// be acyclic. Mixed directed/undirected edge sets are allowed and are
// moralized before mask construction.
class DependencyGraph {
 public:
  DependencyGraph(std::vector<std::string> nodes, std::vector<Edge> edges);

  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  int index_of(const std::string& name) const;  // throws on unknown node

  bool has_directed_edges() const { return directed_count_ > 0; }
  bool has_undirected_edges() const { return undirected_count_ > 0; }

  // Neighbors over undirected edges (sorted, unique).
  std::vector<int> undirected_neighbors(int node) const;
  std::vector<int> parents(int node) const;
  std::vector<int> children(int node) const;

  // Empty when the directed part is acyclic, otherwise one directed cycle
  // as a node sequence (first == last).
  std::vector<std::string> find_directed_cycle() const;

  // Drops edge directions and connects co-parents of every node.
  DependencyGraph moralized() const;

  // One edge per line: source<TAB>target<TAB>kind[<TAB>sign]. The node
  // universe comes from `nodes` (normally the dataset schema).
  static DependencyGraph from_edge_list_file(const std::string& path,
                                             std::vector<std::string> nodes);
  // Square 0/1 adjacency CSV with a header row of feature names. Symmetric
  // pairs become undirected edges, asymmetric entries directed ones.
  static DependencyGraph from_adjacency_csv(const std::string& path);
  // Reads either format, picking by extension (.csv -> adjacency).
  static DependencyGraph load(const std::string& path,
                              std::vector<std::string> nodes);

  void write_edge_list(const std::string& path) const;

 private:
  std::vector<std::string> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, int> index_;
  int directed_count_ = 0;
  int undirected_count_ = 0;
};

// Binary allowed-path matrix. Rows are input units, columns output units;
// entries are exactly 0 or 1.
struct DependencyMask {
  Eigen::MatrixXd matrix;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;

  int rows() const { return static_cast<int>(matrix.rows()); }
  int cols() const { return static_cast<int>(matrix.cols()); }
  void validate() const;  // 0/1 entries, label sizes match
};

// mask[i,j] = 1 iff i == j or {i,j} is an undirected edge. Rejects graphs
// with directed edges.
DependencyMask neighbor_mask(const DependencyGraph& g);

// mask[i,j] = 1 iff i == j or i is in the Markov blanket of j
// (parents, children, co-parents). Requires a DAG.
DependencyMask markov_blanket_mask(const DependencyGraph& g);

// Accepts any graph: undirected -> neighbor_mask, directed -> Markov blanket,
// mixed -> moralize then neighbor_mask.
DependencyMask dependency_mask(const DependencyGraph& g);

// out[i,j] = 1 - in[i,j]
DependencyMask complement_mask(const DependencyMask& s);

// Block-expands a feature-level mask: row block i has row_widths[i] rows, all
// equal to the original entry. Labels become "name:k" per sub-unit.
DependencyMask expand_mask(const DependencyMask& s,
                           const std::vector<int>& row_widths,
                           const std::vector<int>& col_widths);

// BFS order from `start` over undirected edges; neighbor ties and component
// seeds break by ascending node index. Disconnected components are appended.
std::vector<int> bfs_order(const DependencyGraph& g, int start);

// Kahn topological order with ascending-index tie-breaking. Requires a DAG.
std::vector<int> topological_order(const DependencyGraph& g);

}  // namespace ngm

#endif  // NGM_GRAPH_HPP
