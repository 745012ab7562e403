#include "ngm/graph.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "ngm/error.hpp"

namespace ngm {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.push_back("");
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

DependencyGraph::DependencyGraph(std::vector<std::string> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
    require(!nodes_[i].empty(), "graph: empty node name at position ", i);
    auto [it, inserted] = index_.emplace(nodes_[i], i);
    (void)it;
    require(inserted, "graph: duplicate node name '", nodes_[i], "'");
  }
  for (const Edge& e : edges_) {
    require(index_.count(e.source), "graph: edge endpoint '", e.source, "' is not a node");
    require(index_.count(e.target), "graph: edge endpoint '", e.target, "' is not a node");
    require(e.source != e.target, "graph: self-loop on '", e.source, "'");
    if (e.sign) require(*e.sign == '+' || *e.sign == '-', "graph: bad edge sign");
    if (e.kind == EdgeKind::Directed) ++directed_count_;
    else ++undirected_count_;
  }
  auto cycle = find_directed_cycle();
  if (!cycle.empty()) {
    std::string msg = "graph: directed cycle: ";
    for (std::size_t i = 0; i < cycle.size(); ++i) {
      if (i) msg += " -> ";
      msg += cycle[i];
    }
    throw Error(msg);
  }
}

int DependencyGraph::index_of(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), "graph: unknown node '", name, "'");
  return it->second;
}

std::vector<int> DependencyGraph::undirected_neighbors(int node) const {
  std::set<int> nb;
  for (const Edge& e : edges_) {
    if (e.kind != EdgeKind::Undirected) continue;
    const int s = index_.at(e.source), t = index_.at(e.target);
    if (s == node) nb.insert(t);
    if (t == node) nb.insert(s);
  }
  return {nb.begin(), nb.end()};
}

std::vector<int> DependencyGraph::parents(int node) const {
  std::set<int> out;
  for (const Edge& e : edges_)
    if (e.kind == EdgeKind::Directed && index_.at(e.target) == node)
      out.insert(index_.at(e.source));
  return {out.begin(), out.end()};
}

std::vector<int> DependencyGraph::children(int node) const {
  std::set<int> out;
  for (const Edge& e : edges_)
    if (e.kind == EdgeKind::Directed && index_.at(e.source) == node)
      out.insert(index_.at(e.target));
  return {out.begin(), out.end()};
}

std::vector<std::string> DependencyGraph::find_directed_cycle() const {
  const int n = node_count();
  // 0 = unvisited, 1 = on stack, 2 = done
  std::vector<int> state(n, 0), parent(n, -1);
  std::vector<std::vector<int>> adj(n);
  for (const Edge& e : edges_)
    if (e.kind == EdgeKind::Directed)
      adj[index_.at(e.source)].push_back(index_.at(e.target));
  for (auto& a : adj) std::sort(a.begin(), a.end());

  std::vector<std::string> cycle;
  // iterative DFS
  for (int root = 0; root < n && cycle.empty(); ++root) {
    if (state[root] != 0) continue;
    std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
    state[root] = 1;
    while (!stack.empty() && cycle.empty()) {
      auto& [u, k] = stack.back();
      if (k < adj[u].size()) {
        const int v = adj[u][k++];
        if (state[v] == 0) {
          state[v] = 1;
          parent[v] = u;
          stack.push_back({v, 0});
        } else if (state[v] == 1) {
          // back edge u -> v closes a cycle
          std::vector<int> path{v};
          for (int w = u; w != v; w = parent[w]) path.push_back(w);
          path.push_back(v);
          std::reverse(path.begin() + 1, path.end());
          for (int w : path) cycle.push_back(nodes_[w]);
        }
      } else {
        state[u] = 2;
        stack.pop_back();
      }
    }
  }
  return cycle;
}

DependencyGraph DependencyGraph::moralized() const {
  std::set<std::pair<int, int>> undirected;
  auto add = [&](int a, int b) {
    if (a == b) return;
    undirected.insert({std::min(a, b), std::max(a, b)});
  };
  for (const Edge& e : edges_) add(index_.at(e.source), index_.at(e.target));
  // connect co-parents
  for (int v = 0; v < node_count(); ++v) {
    const auto ps = parents(v);
    for (std::size_t i = 0; i < ps.size(); ++i)
      for (std::size_t j = i + 1; j < ps.size(); ++j) add(ps[i], ps[j]);
  }
  std::vector<Edge> edges;
  for (auto [a, b] : undirected)
    edges.push_back({nodes_[a], nodes_[b], EdgeKind::Undirected, {}, {}});
  return DependencyGraph(nodes_, std::move(edges));
}

DependencyGraph DependencyGraph::from_edge_list_file(const std::string& path,
                                                     std::vector<std::string> nodes) {
  std::ifstream in(path);
  require(in.good(), "cannot open graph file '", path, "'");
  std::vector<Edge> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto fields = split(t, '\t');
    require(fields.size() >= 3 && fields.size() <= 4, "graph file '", path, "' line ",
            lineno, ": expected source<TAB>target<TAB>kind[<TAB>sign]");
    Edge e;
    e.source = trim(fields[0]);
    e.target = trim(fields[1]);
    const std::string kind = trim(fields[2]);
    if (kind == "directed") e.kind = EdgeKind::Directed;
    else if (kind == "undirected") e.kind = EdgeKind::Undirected;
    else fail("graph file '", path, "' line ", lineno, ": unknown edge kind '", kind, "'");
    if (fields.size() == 4) {
      const std::string s = trim(fields[3]);
      require(s == "+" || s == "-", "graph file '", path, "' line ", lineno,
              ": sign must be + or -");
      e.sign = s[0];
    }
    edges.push_back(std::move(e));
  }
  return DependencyGraph(std::move(nodes), std::move(edges));
}

DependencyGraph DependencyGraph::from_adjacency_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open adjacency file '", path, "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "adjacency file '", path, "' is empty");
  std::vector<std::string> names;
  for (auto& f : split(trim(line), ',')) names.push_back(trim(f));
  const int n = static_cast<int>(names.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  int row = 0;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    require(row < n, "adjacency file '", path, "': more rows than header columns");
    auto fields = split(t, ',');
    require(static_cast<int>(fields.size()) == n, "adjacency file '", path, "' row ",
            row + 2, ": expected ", n, " columns, got ", fields.size());
    for (int j = 0; j < n; ++j) {
      const std::string c = trim(fields[j]);
      require(c == "0" || c == "1", "adjacency file '", path, "' row ", row + 2,
              ": entries must be 0 or 1, got '", c, "'");
      a(row, j) = c == "1" ? 1.0 : 0.0;
    }
    ++row;
  }
  require(row == n, "adjacency file '", path, "': expected ", n, " rows, got ", row);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || a(i, j) == 0.0) continue;
      if (a(j, i) != 0.0) {
        if (i < j) edges.push_back({names[i], names[j], EdgeKind::Undirected, {}, {}});
      } else {
        edges.push_back({names[i], names[j], EdgeKind::Directed, {}, {}});
      }
    }
  }
  return DependencyGraph(std::move(names), std::move(edges));
}

DependencyGraph DependencyGraph::load(const std::string& path,
                                      std::vector<std::string> nodes) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".csv")
    return from_adjacency_csv(path);
  return from_edge_list_file(path, std::move(nodes));
}

void DependencyGraph::write_edge_list(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), "cannot write graph file '", path, "'");
  for (const Edge& e : edges_) {
    out << e.source << '\t' << e.target << '\t'
        << (e.kind == EdgeKind::Directed ? "directed" : "undirected");
    if (e.sign) out << '\t' << *e.sign;
    out << '\n';
  }
}

void DependencyMask::validate() const {
  require(static_cast<int>(row_labels.size()) == rows(), "mask: row label count mismatch");
  require(static_cast<int>(col_labels.size()) == cols(), "mask: column label count mismatch");
  for (int i = 0; i < rows(); ++i)
    for (int j = 0; j < cols(); ++j)
      require(matrix(i, j) == 0.0 || matrix(i, j) == 1.0, "mask: entry (", i, ",", j,
              ") is not 0/1");
}

DependencyMask neighbor_mask(const DependencyGraph& g) {
  require(!g.has_directed_edges(),
          "neighbor_mask: graph has directed edges; use markov_blanket_mask or "
          "dependency_mask");
  const int n = g.node_count();
  DependencyMask m{Eigen::MatrixXd::Identity(n, n), g.nodes(), g.nodes()};
  for (int i = 0; i < n; ++i)
    for (int j : g.undirected_neighbors(i)) m.matrix(i, j) = 1.0;
  return m;
}

DependencyMask markov_blanket_mask(const DependencyGraph& g) {
  require(!g.has_undirected_edges(), "markov_blanket_mask: graph has undirected edges");
  // parents + children + co-parents == neighbors in the moral graph
  return neighbor_mask(g.moralized());
}

DependencyMask dependency_mask(const DependencyGraph& g) {
  if (!g.has_directed_edges()) return neighbor_mask(g);
  if (!g.has_undirected_edges()) return markov_blanket_mask(g);
  return neighbor_mask(g.moralized());
}

DependencyMask complement_mask(const DependencyMask& s) {
  DependencyMask out = s;
  out.matrix = Eigen::MatrixXd::Ones(s.rows(), s.cols()) - s.matrix;
  return out;
}

DependencyMask expand_mask(const DependencyMask& s, const std::vector<int>& row_widths,
                           const std::vector<int>& col_widths) {
  require(static_cast<int>(row_widths.size()) == s.rows(),
          "expand_mask: row width count ", row_widths.size(), " != mask rows ", s.rows());
  require(static_cast<int>(col_widths.size()) == s.cols(),
          "expand_mask: column width count ", col_widths.size(), " != mask cols ",
          s.cols());
  int R = 0, C = 0;
  for (int w : row_widths) {
    require(w >= 1, "expand_mask: widths must be >= 1");
    R += w;
  }
  for (int w : col_widths) {
    require(w >= 1, "expand_mask: widths must be >= 1");
    C += w;
  }
  DependencyMask out;
  out.matrix = Eigen::MatrixXd::Zero(R, C);
  out.row_labels.reserve(R);
  out.col_labels.reserve(C);
  for (int i = 0, r = 0; i < s.rows(); ++i)
    for (int k = 0; k < row_widths[i]; ++k, ++r)
      out.row_labels.push_back(s.row_labels[i] + ":" + std::to_string(k));
  for (int j = 0, c = 0; j < s.cols(); ++j)
    for (int k = 0; k < col_widths[j]; ++k, ++c)
      out.col_labels.push_back(s.col_labels[j] + ":" + std::to_string(k));
  int r0 = 0;
  for (int i = 0; i < s.rows(); ++i) {
    int c0 = 0;
    for (int j = 0; j < s.cols(); ++j) {
      out.matrix.block(r0, c0, row_widths[i], col_widths[j]).setConstant(s.matrix(i, j));
      c0 += col_widths[j];
    }
    r0 += row_widths[i];
  }
  return out;
}

std::vector<int> bfs_order(const DependencyGraph& g, int start) {
  const int n = g.node_count();
  require(start >= 0 && start < n, "bfs_order: start node out of range");
  std::vector<int> order;
  std::vector<char> seen(n, 0);
  auto run = [&](int s) {
    std::queue<int> q;
    q.push(s);
    seen[s] = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      order.push_back(u);
      for (int v : g.undirected_neighbors(u)) {
        if (!seen[v]) {
          seen[v] = 1;
          q.push(v);
        }
      }
    }
  };
  run(start);
  for (int v = 0; v < n; ++v)
    if (!seen[v]) run(v);  // remaining components, seeded by lowest index
  return order;
}

std::vector<int> topological_order(const DependencyGraph& g) {
  require(!g.has_undirected_edges(), "topological_order: graph has undirected edges");
  const int n = g.node_count();
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> adj(n);
  for (const Edge& e : g.edges()) {
    const int s = g.index_of(e.source), t = g.index_of(e.target);
    adj[s].push_back(t);
    ++indeg[t];
  }
  std::set<int> ready;
  for (int v = 0; v < n; ++v)
    if (indeg[v] == 0) ready.insert(v);
  std::vector<int> order;
  while (!ready.empty()) {
    const int u = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(u);
    for (int v : adj[u])
      if (--indeg[v] == 0) ready.insert(v);
  }
  require(static_cast<int>(order.size()) == n, "topological_order: graph has a cycle");
  return order;
}

}  // namespace ngm
