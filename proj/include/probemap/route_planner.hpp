#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "probemap/calibration.hpp"
#include "probemap/pose_optimizer.hpp"

namespace probemap::route {

struct GraphNode {
  double x_mm = 0.0;
  double y_mm = 0.0;
  std::string segment_id;
  int pose_index = -1;       // -1 marks the home node
  double theta_rad = 0.0;
};

/// Complete Euclidean graph over contact nodes. nodes[start] is the robot
/// home; dist is row-major n*n, symmetric with zero diagonal.
struct TourGraph {
  std::vector<GraphNode> nodes;
  std::vector<double> dist;
  int start = 0;

  int size() const { return static_cast<int>(nodes.size()); }
  double d(int i, int j) const { return dist[static_cast<size_t>(i) * nodes.size() + j]; }
};

/// Open-loop visiting order: starts at the graph's start node, visits every
/// node exactly once, no return edge.
struct Tour {
  std::vector<int> order;
  double length_mm = 0.0;
  std::string algorithm;
  uint64_t seed = 0;
};

struct PlannerConfig {
  double alpha = 0.02;     // uniform noise level, fraction of each edge
  int generations = 1000;
  uint64_t seed = 0;
};

struct GaConfig {
  int population = 10;
  int generations = 1000;
  double mutation_rate = 0.8;
  uint64_t seed = 0;
};

/// Builds the graph from optimizer output: individually valid poses become
/// robot-frame nodes (image-plane mm via mask placement, then K_img_robot
/// plus the correction mesh); node 0 is the configured home. Throws if no
/// pose is valid.
TourGraph build_graph(std::span<const optim::PoseSet> sets,
                      const calib::FrameCalibration& cal,
                      double home_x_mm = 0.0, double home_y_mm = 0.0);

/// Graph from bare nodes (testing / benchmarks).
TourGraph make_graph(std::vector<GraphNode> nodes, int start = 0);

double tour_length(const TourGraph& g, std::span<const int> order);

/// Repeated nearest-unvisited-node construction from the start node.
/// Ties break to the lowest node index.
Tour greedy_dijkstra(const TourGraph& g);

/// Greedy construction repeated over `generations` perturbations of the
/// edge lengths, eps_ij ~ U(-alpha d_ij, +alpha d_ij) fresh per edge per
/// generation; generation 0 is noise-free, and tours are always scored on
/// the true lengths, so the result never loses to greedy_dijkstra.
Tour noisy_dijkstra(const TourGraph& g, const PlannerConfig& cfg);

/// Closed Christofides tour (MST + min-weight matching on odd vertices +
/// Euler walk + shortcut), exposed for the 1.5x bound check. The matching is
/// exact (bitmask DP) up to 16 odd vertices, greedy beyond.
std::vector<int> christofides_cycle(const TourGraph& g);

/// Open-loop Christofides: the closed tour with the heavier of the two
/// cycle edges at the start node removed.
Tour christofides_otsp(const TourGraph& g);

/// A* over (visited set, current node). Exact for n <= 15 with an
/// MST-of-remaining admissible heuristic; beam search (width 1000) with an
/// incremental nearest-neighbor-sum heuristic beyond.
Tour astar_otsp(const TourGraph& g);

/// Order-crossover + swap-mutation genetic algorithm with elitism 1 over
/// open-loop permutations with a fixed start.
Tour ga_otsp(const TourGraph& g, const GaConfig& cfg);

struct BenchmarkRow {
  int graph_id = 0;
  std::string algorithm;
  double length_mm = 0.0;
  double wall_ms = 0.0;
  uint64_t seed = 0;
};

struct AlgorithmStats {
  std::string algorithm;
  double median_mm = 0.0;
  double variance_mm2 = 0.0;
  double mean_wall_ms = 0.0;
};

struct BenchmarkTable {
  std::vector<BenchmarkRow> rows;
  std::vector<AlgorithmStats> summarize() const;
  void write_csv(const std::string& path) const;
};

/// Runs the named planners on every graph. Known names: greedy_dijkstra,
/// noisy_dijkstra, christofides, astar, ga.
BenchmarkTable benchmark(std::span<const TourGraph> graphs,
                         const PlannerConfig& noisy_cfg, const GaConfig& ga_cfg,
                         std::span<const std::string> algorithms);

/// Clustered random instance mirroring the measurement layout: `clusters`
/// film centers in a w x h mm plane, `per_cluster` nodes jittered around
/// each, plus a home node at the origin.
TourGraph random_clustered_graph(int clusters, int per_cluster, double w_mm,
                                 double h_mm, uint64_t seed);

void write_tour_csv(const std::string& path, const TourGraph& g, const Tour& t);

/// Rebuilds a graph (nodes in file order) and the identity-order tour from
/// a written tour CSV.
std::pair<TourGraph, Tour> read_tour_csv(const std::string& path);

}  // namespace probemap::route
