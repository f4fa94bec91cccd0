#include "probemap/route_planner.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "probemap/rng.hpp"

namespace probemap::route {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_double(double v, const char* fmt = "%.9f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

// Nearest-unvisited construction on an arbitrary distance table.
std::vector<int> greedy_order(int n, int start, const double* dist) {
  std::vector<int> order;
  order.reserve(static_cast<size_t>(n));
  std::vector<bool> visited(static_cast<size_t>(n), false);
  int cur = start;
  visited[static_cast<size_t>(cur)] = true;
  order.push_back(cur);
  for (int step = 1; step < n; ++step) {
    int best = -1;
    double best_d = kInf;
    const double* row = dist + static_cast<size_t>(cur) * n;
    for (int j = 0; j < n; ++j) {
      if (!visited[static_cast<size_t>(j)] && row[j] < best_d) {
        best_d = row[j];
        best = j;
      }
    }
    visited[static_cast<size_t>(best)] = true;
    order.push_back(best);
    cur = best;
  }
  return order;
}

Tour finish_tour(const TourGraph& g, std::vector<int> order, std::string algorithm,
                 uint64_t seed = 0) {
  Tour t;
  t.length_mm = tour_length(g, order);
  t.order = std::move(order);
  t.algorithm = std::move(algorithm);
  t.seed = seed;
  return t;
}

// ---- Christofides pieces ----------------------------------------------

std::vector<std::pair<int, int>> prim_mst(const TourGraph& g) {
  const int n = g.size();
  std::vector<bool> in_tree(static_cast<size_t>(n), false);
  std::vector<double> best(static_cast<size_t>(n), kInf);
  std::vector<int> parent(static_cast<size_t>(n), -1);
  best[0] = 0.0;
  for (int iter = 0; iter < n; ++iter) {
    int u = -1;
    double bd = kInf;
    for (int v = 0; v < n; ++v) {
      if (!in_tree[static_cast<size_t>(v)] && best[static_cast<size_t>(v)] < bd) {
        bd = best[static_cast<size_t>(v)];
        u = v;
      }
    }
    in_tree[static_cast<size_t>(u)] = true;
    for (int v = 0; v < n; ++v) {
      if (!in_tree[static_cast<size_t>(v)] && g.d(u, v) < best[static_cast<size_t>(v)]) {
        best[static_cast<size_t>(v)] = g.d(u, v);
        parent[static_cast<size_t>(v)] = u;
      }
    }
  }
  std::vector<std::pair<int, int>> edges;
  for (int v = 1; v < n; ++v) edges.emplace_back(parent[static_cast<size_t>(v)], v);
  return edges;
}

// Exact minimum-weight perfect matching over <= 16 vertices (bitmask DP).
std::vector<std::pair<int, int>> match_exact(const TourGraph& g,
                                             const std::vector<int>& odd) {
  const int m = static_cast<int>(odd.size());
  const size_t full = size_t{1} << m;
  std::vector<double> cost(full, kInf);
  std::vector<int> choice(full, -1);
  cost[0] = 0.0;
  for (size_t s = 1; s < full; ++s) {
    const int i = std::countr_zero(s);
    if (std::popcount(s) % 2 != 0) continue;
    for (int j = i + 1; j < m; ++j) {
      if (!(s >> j & 1)) continue;
      const size_t rest = s & ~(size_t{1} << i) & ~(size_t{1} << j);
      const double c = cost[rest] + g.d(odd[static_cast<size_t>(i)], odd[static_cast<size_t>(j)]);
      if (c < cost[s]) {
        cost[s] = c;
        choice[s] = j;
      }
    }
  }
  std::vector<std::pair<int, int>> pairs;
  size_t s = full - 1;
  while (s) {
    const int i = std::countr_zero(s);
    const int j = choice[s];
    pairs.emplace_back(odd[static_cast<size_t>(i)], odd[static_cast<size_t>(j)]);
    s &= ~(size_t{1} << i);
    s &= ~(size_t{1} << j);
  }
  return pairs;
}

std::vector<std::pair<int, int>> match_greedy(const TourGraph& g,
                                              const std::vector<int>& odd) {
  struct E {
    double d;
    int a, b;
  };
  std::vector<E> edges;
  for (size_t i = 0; i < odd.size(); ++i) {
    for (size_t j = i + 1; j < odd.size(); ++j) {
      edges.push_back({g.d(odd[i], odd[j]), odd[i], odd[j]});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const E& x, const E& y) {
    return x.d != y.d ? x.d < y.d : std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  std::vector<bool> used(static_cast<size_t>(g.size()), false);
  std::vector<std::pair<int, int>> pairs;
  for (const auto& e : edges) {
    if (!used[static_cast<size_t>(e.a)] && !used[static_cast<size_t>(e.b)]) {
      used[static_cast<size_t>(e.a)] = used[static_cast<size_t>(e.b)] = true;
      pairs.emplace_back(e.a, e.b);
    }
  }
  return pairs;
}

// Hierholzer Eulerian circuit on the MST+matching multigraph, then
// first-occurrence shortcutting.
std::vector<int> euler_shortcut(int n, int start,
                                const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<size_t>(n));  // (to, edge id)
  for (size_t e = 0; e < edges.size(); ++e) {
    adj[static_cast<size_t>(edges[e].first)].push_back({edges[e].second, static_cast<int>(e)});
    adj[static_cast<size_t>(edges[e].second)].push_back({edges[e].first, static_cast<int>(e)});
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  std::vector<bool> used(edges.size(), false);
  std::vector<size_t> next(static_cast<size_t>(n), 0);
  std::vector<int> stack = {start}, circuit;
  while (!stack.empty()) {
    const int v = stack.back();
    auto& cands = adj[static_cast<size_t>(v)];
    size_t& i = next[static_cast<size_t>(v)];
    while (i < cands.size() && used[static_cast<size_t>(cands[i].second)]) ++i;
    if (i == cands.size()) {
      circuit.push_back(v);
      stack.pop_back();
    } else {
      used[static_cast<size_t>(cands[i].second)] = true;
      stack.push_back(cands[i].first);
    }
  }
  std::vector<int> cycle;
  std::vector<bool> seen(static_cast<size_t>(n), false);
  for (int v : circuit) {
    if (!seen[static_cast<size_t>(v)]) {
      seen[static_cast<size_t>(v)] = true;
      cycle.push_back(v);
    }
  }
  return cycle;  // begins at start
}

// ---- A* ----------------------------------------------------------------

double mst_weight(const TourGraph& g, const std::vector<int>& verts) {
  const size_t m = verts.size();
  if (m <= 1) return 0.0;
  std::vector<double> best(m, kInf);
  std::vector<bool> in_tree(m, false);
  best[0] = 0.0;
  double total = 0.0;
  for (size_t iter = 0; iter < m; ++iter) {
    size_t u = m;
    double bd = kInf;
    for (size_t v = 0; v < m; ++v) {
      if (!in_tree[v] && best[v] < bd) {
        bd = best[v];
        u = v;
      }
    }
    in_tree[u] = true;
    total += bd;
    for (size_t v = 0; v < m; ++v) {
      if (!in_tree[v]) best[v] = std::min(best[v], g.d(verts[u], verts[v]));
    }
  }
  return total;
}

Tour astar_exact(const TourGraph& g) {
  const int n = g.size();
  const size_t full = size_t{1} << n;
  const size_t nstates = full * static_cast<size_t>(n);
  std::vector<double> best_g(nstates, kInf);
  std::vector<int> parent(nstates, -1);

  auto heuristic = [&](size_t mask, int cur) {
    std::vector<int> verts = {cur};
    for (int v = 0; v < n; ++v) {
      if (!(mask >> v & 1)) verts.push_back(v);
    }
    return mst_weight(g, verts);
  };

  struct Item {
    double f, gcost;
    size_t mask;
    int cur;
    bool operator>(const Item& o) const {
      if (f != o.f) return f > o.f;
      if (gcost != o.gcost) return gcost > o.gcost;
      if (mask != o.mask) return mask > o.mask;
      return cur > o.cur;
    }
  };
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> open;

  const size_t start_mask = size_t{1} << g.start;
  const size_t goal_mask = full - 1;
  best_g[start_mask * static_cast<size_t>(n) + static_cast<size_t>(g.start)] = 0.0;
  open.push({heuristic(start_mask, g.start), 0.0, start_mask, g.start});

  size_t goal_state = 0;
  while (!open.empty()) {
    const Item it = open.top();
    open.pop();
    const size_t sid = it.mask * static_cast<size_t>(n) + static_cast<size_t>(it.cur);
    if (it.gcost > best_g[sid]) continue;
    if (it.mask == goal_mask) {
      goal_state = sid;
      break;
    }
    for (int j = 0; j < n; ++j) {
      if (it.mask >> j & 1) continue;
      const size_t nmask = it.mask | (size_t{1} << j);
      const size_t nsid = nmask * static_cast<size_t>(n) + static_cast<size_t>(j);
      const double ng = it.gcost + g.d(it.cur, j);
      if (ng < best_g[nsid]) {
        best_g[nsid] = ng;
        parent[nsid] = static_cast<int>(sid);  // state ids fit in int for n <= 15
        open.push({ng + heuristic(nmask, j), ng, nmask, j});
      }
    }
  }

  std::vector<int> order;
  size_t sid = goal_state;
  while (true) {
    order.push_back(static_cast<int>(sid % static_cast<size_t>(n)));
    const int p = parent[sid];
    if (p < 0) break;
    sid = static_cast<size_t>(p);
  }
  std::reverse(order.begin(), order.end());
  return finish_tour(g, std::move(order), "astar");
}

Tour astar_beam(const TourGraph& g, int beam_width) {
  const int n = g.size();
  // Global nearest-neighbor distance per node: admissible because the edge
  // entering a node in any remaining path is at least this long.
  std::vector<double> gnn(static_cast<size_t>(n), kInf);
  for (int v = 0; v < n; ++v) {
    for (int w = 0; w < n; ++w) {
      if (w != v) gnn[static_cast<size_t>(v)] = std::min(gnn[static_cast<size_t>(v)], g.d(v, w));
    }
  }

  struct State {
    std::vector<int> order;
    std::vector<bool> visited;
    double gcost = 0.0;
    double h = 0.0;
  };
  State init;
  init.order = {g.start};
  init.visited.assign(static_cast<size_t>(n), false);
  init.visited[static_cast<size_t>(g.start)] = true;
  for (int v = 0; v < n; ++v) {
    if (v != g.start) init.h += gnn[static_cast<size_t>(v)];
  }
  std::vector<State> beam = {std::move(init)};

  struct Cand {
    double f, gcost;
    int parent, next;
  };
  for (int level = 1; level < n; ++level) {
    std::vector<Cand> cands;
    cands.reserve(beam.size() * static_cast<size_t>(n - level));
    for (size_t s = 0; s < beam.size(); ++s) {
      const int cur = beam[s].order.back();
      for (int j = 0; j < n; ++j) {
        if (beam[s].visited[static_cast<size_t>(j)]) continue;
        const double ng = beam[s].gcost + g.d(cur, j);
        const double nh = beam[s].h - gnn[static_cast<size_t>(j)];
        cands.push_back({ng + nh, ng, static_cast<int>(s), j});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      return std::tie(a.f, a.gcost, a.parent, a.next) < std::tie(b.f, b.gcost, b.parent, b.next);
    });
    if (static_cast<int>(cands.size()) > beam_width) cands.resize(static_cast<size_t>(beam_width));
    std::vector<State> next_beam;
    next_beam.reserve(cands.size());
    for (const auto& c : cands) {
      State st = beam[static_cast<size_t>(c.parent)];
      st.order.push_back(c.next);
      st.visited[static_cast<size_t>(c.next)] = true;
      st.gcost = c.gcost;
      st.h = beam[static_cast<size_t>(c.parent)].h - gnn[static_cast<size_t>(c.next)];
      next_beam.push_back(std::move(st));
    }
    beam = std::move(next_beam);
  }
  size_t best = 0;
  for (size_t s = 1; s < beam.size(); ++s) {
    if (beam[s].gcost < beam[best].gcost) best = s;
  }
  return finish_tour(g, std::move(beam[best].order), "astar");
}

}  // namespace

TourGraph build_graph(std::span<const optim::PoseSet> sets,
                      const calib::FrameCalibration& cal, double home_x_mm,
                      double home_y_mm) {
  std::vector<GraphNode> nodes;
  nodes.push_back({home_x_mm, home_y_mm, "HOME", -1, 0.0});
  for (const auto& set : sets) {
    for (size_t i = 0; i < set.poses.size(); ++i) {
      if (!set.pose_valid[i]) continue;
      const auto& p = set.poses[i];
      const double x_img = set.origin_mm_x + set.scale_mm_per_px * p.x;
      const double y_img = set.origin_mm_y + set.scale_mm_per_px * p.y;
      const auto r = calib::image_to_robot(cal, x_img, y_img);
      nodes.push_back({r[0], r[1], set.segment_id, static_cast<int>(i), p.theta});
    }
  }
  if (nodes.size() < 2) throw std::runtime_error("build_graph: zero valid poses");
  return make_graph(std::move(nodes), 0);
}

TourGraph make_graph(std::vector<GraphNode> nodes, int start) {
  TourGraph g;
  g.nodes = std::move(nodes);
  g.start = start;
  const size_t n = g.nodes.size();
  g.dist.assign(n * n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const double dx = g.nodes[i].x_mm - g.nodes[j].x_mm;
      const double dy = g.nodes[i].y_mm - g.nodes[j].y_mm;
      const double d = std::hypot(dx, dy);
      g.dist[i * n + j] = d;
      g.dist[j * n + i] = d;
    }
  }
  return g;
}

double tour_length(const TourGraph& g, std::span<const int> order) {
  double total = 0.0;
  for (size_t i = 1; i < order.size(); ++i) {
    total += g.d(order[i - 1], order[i]);
  }
  return total;
}

Tour greedy_dijkstra(const TourGraph& g) {
  return finish_tour(g, greedy_order(g.size(), g.start, g.dist.data()), "greedy_dijkstra");
}

Tour noisy_dijkstra(const TourGraph& g, const PlannerConfig& cfg) {
  if (cfg.alpha < 0.0) throw std::invalid_argument("noisy_dijkstra: alpha must be >= 0");
  if (cfg.generations < 1) throw std::invalid_argument("noisy_dijkstra: generations must be >= 1");
  const int n = g.size();
  std::vector<double> pert(g.dist);
  std::vector<int> best_order;
  double best_len = kInf;

  for (int gen = 0; gen < cfg.generations; ++gen) {
    if (gen == 0 || cfg.alpha == 0.0) {
      std::copy(g.dist.begin(), g.dist.end(), pert.begin());
    } else {
      // Fresh uniform noise per edge per generation, seeded per generation
      // so results are independent of any outer parallel schedule.
      Rng rng(mix_seed(cfg.seed, static_cast<uint64_t>(gen)));
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          const double d = g.d(i, j);
          const double eps = rng.uniform(-cfg.alpha * d, cfg.alpha * d);
          pert[static_cast<size_t>(i) * n + j] = d + eps;
          pert[static_cast<size_t>(j) * n + i] = d + eps;
        }
      }
    }
    std::vector<int> order = greedy_order(n, g.start, pert.data());
    const double len = tour_length(g, order);  // scored on true lengths
    if (len < best_len) {
      best_len = len;
      best_order = std::move(order);
    }
  }
  Tour t = finish_tour(g, std::move(best_order), "noisy_dijkstra", cfg.seed);
  return t;
}

std::vector<int> christofides_cycle(const TourGraph& g) {
  const int n = g.size();
  if (n == 1) return {g.start};
  auto edges = prim_mst(g);
  std::vector<int> degree(static_cast<size_t>(n), 0);
  for (const auto& e : edges) {
    ++degree[static_cast<size_t>(e.first)];
    ++degree[static_cast<size_t>(e.second)];
  }
  std::vector<int> odd;
  for (int v = 0; v < n; ++v) {
    if (degree[static_cast<size_t>(v)] % 2 == 1) odd.push_back(v);
  }
  const auto matching = odd.size() <= 16 ? match_exact(g, odd) : match_greedy(g, odd);
  edges.insert(edges.end(), matching.begin(), matching.end());
  return euler_shortcut(n, g.start, edges);
}

Tour christofides_otsp(const TourGraph& g) {
  std::vector<int> cycle = christofides_cycle(g);
  if (cycle.size() > 2) {
    const int first = cycle[1];
    const int last = cycle.back();
    // Two cycle edges touch the start node; dropping the heavier one leaves
    // an open path that still begins at start.
    if (g.d(g.start, first) > g.d(last, g.start)) {
      std::reverse(cycle.begin() + 1, cycle.end());
    }
  }
  return finish_tour(g, std::move(cycle), "christofides");
}

Tour astar_otsp(const TourGraph& g) {
  if (g.size() <= 15) return astar_exact(g);
  return astar_beam(g, 1000);
}

Tour ga_otsp(const TourGraph& g, const GaConfig& cfg) {
  const int n = g.size();
  Rng rng(cfg.seed);
  std::vector<int> base;
  for (int v = 0; v < n; ++v) {
    if (v != g.start) base.push_back(v);
  }
  const int m = static_cast<int>(base.size());
  if (m <= 1) {
    std::vector<int> order = {g.start};
    order.insert(order.end(), base.begin(), base.end());
    return finish_tour(g, std::move(order), "ga", cfg.seed);
  }

  auto fitness = [&](const std::vector<int>& chrom) {
    double len = g.d(g.start, chrom[0]);
    for (int i = 1; i < m; ++i) len += g.d(chrom[static_cast<size_t>(i) - 1], chrom[static_cast<size_t>(i)]);
    return len;
  };

  struct Individual {
    std::vector<int> chrom;
    double len;
  };
  std::vector<Individual> pop(static_cast<size_t>(cfg.population));
  for (auto& ind : pop) {
    ind.chrom = base;
    for (int i = m - 1; i > 0; --i) {
      std::swap(ind.chrom[static_cast<size_t>(i)], ind.chrom[static_cast<size_t>(rng.uniform_int(i + 1))]);
    }
    ind.len = fitness(ind.chrom);
  }

  auto better = [](const Individual& a, const Individual& b) {
    return a.len != b.len ? a.len < b.len : a.chrom < b.chrom;
  };

  Individual best = *std::min_element(pop.begin(), pop.end(), better);
  std::vector<int> child(static_cast<size_t>(m));
  std::vector<bool> taken(static_cast<size_t>(n), false);

  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::vector<Individual> next;
    next.reserve(pop.size());
    next.push_back(best);  // elitism 1
    while (next.size() < pop.size()) {
      auto pick = [&]() -> const Individual& {
        const auto& a = pop[static_cast<size_t>(rng.uniform_int(cfg.population))];
        const auto& b = pop[static_cast<size_t>(rng.uniform_int(cfg.population))];
        return better(a, b) ? a : b;
      };
      const Individual& pa = pick();
      const Individual& pb = pick();
      // Order crossover: copy a slice of parent A, fill the rest in parent
      // B's visiting order.
      int c1 = rng.uniform_int(m), c2 = rng.uniform_int(m);
      if (c1 > c2) std::swap(c1, c2);
      std::fill(taken.begin(), taken.end(), false);
      for (int i = c1; i <= c2; ++i) {
        child[static_cast<size_t>(i)] = pa.chrom[static_cast<size_t>(i)];
        taken[static_cast<size_t>(pa.chrom[static_cast<size_t>(i)])] = true;
      }
      int w = (c2 + 1) % m;
      for (int i = 0; i < m; ++i) {
        const int v = pb.chrom[static_cast<size_t>((c2 + 1 + i) % m)];
        if (!taken[static_cast<size_t>(v)]) {
          child[static_cast<size_t>(w)] = v;
          w = (w + 1) % m;
        }
      }
      if (rng.uniform() < cfg.mutation_rate) {
        const int i = rng.uniform_int(m), j = rng.uniform_int(m);
        std::swap(child[static_cast<size_t>(i)], child[static_cast<size_t>(j)]);
      }
      next.push_back({child, fitness(child)});
    }
    pop = std::move(next);
    const Individual& gen_best = *std::min_element(pop.begin(), pop.end(), better);
    if (better(gen_best, best)) best = gen_best;
  }

  std::vector<int> order = {g.start};
  order.insert(order.end(), best.chrom.begin(), best.chrom.end());
  return finish_tour(g, std::move(order), "ga", cfg.seed);
}

std::vector<AlgorithmStats> BenchmarkTable::summarize() const {
  std::vector<AlgorithmStats> out;
  for (const auto& row : rows) {
    if (std::none_of(out.begin(), out.end(),
                     [&](const AlgorithmStats& s) { return s.algorithm == row.algorithm; })) {
      out.push_back({row.algorithm, 0.0, 0.0, 0.0});
    }
  }
  for (auto& stat : out) {
    std::vector<double> lengths;
    double wall = 0.0;
    for (const auto& row : rows) {
      if (row.algorithm == stat.algorithm) {
        lengths.push_back(row.length_mm);
        wall += row.wall_ms;
      }
    }
    std::sort(lengths.begin(), lengths.end());
    const size_t k = lengths.size();
    stat.median_mm = k % 2 ? lengths[k / 2] : 0.5 * (lengths[k / 2 - 1] + lengths[k / 2]);
    double mean = std::accumulate(lengths.begin(), lengths.end(), 0.0) / static_cast<double>(k);
    double var = 0.0;
    for (double v : lengths) var += (v - mean) * (v - mean);
    stat.variance_mm2 = k > 1 ? var / static_cast<double>(k - 1) : 0.0;
    stat.mean_wall_ms = wall / static_cast<double>(k);
  }
  return out;
}

void BenchmarkTable::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "graph_id,algorithm,length_mm,wall_ms,seed\n";
  for (const auto& r : rows) {
    out << r.graph_id << ',' << r.algorithm << ',' << format_double(r.length_mm, "%.6f")
        << ',' << format_double(r.wall_ms, "%.3f") << ',' << r.seed << '\n';
  }
}

BenchmarkTable benchmark(std::span<const TourGraph> graphs,
                         const PlannerConfig& noisy_cfg, const GaConfig& ga_cfg,
                         std::span<const std::string> algorithms) {
  BenchmarkTable table;
  for (size_t gi = 0; gi < graphs.size(); ++gi) {
    const TourGraph& g = graphs[gi];
    for (const auto& name : algorithms) {
      const auto t0 = std::chrono::steady_clock::now();
      Tour t;
      if (name == "greedy_dijkstra") {
        t = greedy_dijkstra(g);
      } else if (name == "noisy_dijkstra") {
        PlannerConfig cfg = noisy_cfg;
        cfg.seed = mix_seed(noisy_cfg.seed, gi);
        t = noisy_dijkstra(g, cfg);
      } else if (name == "christofides") {
        t = christofides_otsp(g);
      } else if (name == "astar") {
        t = astar_otsp(g);
      } else if (name == "ga") {
        GaConfig cfg = ga_cfg;
        cfg.seed = mix_seed(ga_cfg.seed, gi);
        t = ga_otsp(g, cfg);
      } else {
        throw std::invalid_argument("benchmark: unknown algorithm " + name);
      }
      const auto t1 = std::chrono::steady_clock::now();
      const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      table.rows.push_back({static_cast<int>(gi), t.algorithm, t.length_mm, ms, t.seed});
    }
  }
  return table;
}

TourGraph random_clustered_graph(int clusters, int per_cluster, double w_mm,
                                 double h_mm, uint64_t seed) {
  Rng rng(seed);
  std::vector<GraphNode> nodes;
  nodes.push_back({0.0, 0.0, "HOME", -1, 0.0});
  const double margin = 5.0;
  for (int c = 0; c < clusters; ++c) {
    const double cx = rng.uniform(margin, w_mm - margin);
    const double cy = rng.uniform(margin, h_mm - margin);
    for (int p = 0; p < per_cluster; ++p) {
      nodes.push_back({cx + rng.uniform(-2.0, 2.0), cy + rng.uniform(-2.0, 2.0),
                       "c" + std::to_string(c), p, 0.0});
    }
  }
  return make_graph(std::move(nodes), 0);
}

std::pair<TourGraph, Tour> read_tour_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tour file: " + path);
  std::vector<GraphNode> nodes;
  std::string algorithm = "unknown";
  uint64_t seed = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string token;
      while (meta >> token) {
        if (token.rfind("algorithm=", 0) == 0) algorithm = token.substr(10);
        if (token.rfind("seed=", 0) == 0) seed = std::strtoull(token.c_str() + 5, nullptr, 10);
      }
      continue;
    }
    if (line.rfind("order,", 0) == 0) continue;  // header
    GraphNode node;
    std::istringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // order index, implicit by row
    std::getline(ss, node.segment_id, ',');
    std::getline(ss, cell, ',');
    node.pose_index = std::atoi(cell.c_str());
    std::getline(ss, cell, ',');
    node.x_mm = std::atof(cell.c_str());
    std::getline(ss, cell, ',');
    node.y_mm = std::atof(cell.c_str());
    std::getline(ss, cell, ',');
    node.theta_rad = std::atof(cell.c_str());
    nodes.push_back(std::move(node));
  }
  if (nodes.empty()) throw std::runtime_error("empty tour file: " + path);
  TourGraph g = make_graph(std::move(nodes), 0);
  Tour t;
  t.order.resize(static_cast<size_t>(g.size()));
  std::iota(t.order.begin(), t.order.end(), 0);
  t.length_mm = tour_length(g, t.order);
  t.algorithm = std::move(algorithm);
  t.seed = seed;
  return {std::move(g), std::move(t)};
}

void write_tour_csv(const std::string& path, const TourGraph& g, const Tour& t) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# algorithm=" << t.algorithm << " length_mm=" << format_double(t.length_mm, "%.9f")
      << " seed=" << t.seed << '\n';
  out << "order,segment_id,pose_index,x_mm,y_mm,theta_rad\n";
  for (size_t i = 0; i < t.order.size(); ++i) {
    const auto& node = g.nodes[static_cast<size_t>(t.order[i])];
    out << i << ',' << node.segment_id << ',' << node.pose_index << ','
        << format_double(node.x_mm) << ',' << format_double(node.y_mm) << ','
        << format_double(node.theta_rad, "%.12g") << '\n';
  }
}

}  // namespace probemap::route
