#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <set>

#include "attre2vec/data.hpp"
#include "test_support.hpp"

using namespace attre2vec;

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

// a labeled bundle with `per_class` edges in each of `classes` classes,
// structured as a long cycle so build_graph accepts it
DatasetBundle synthetic_labeled(std::size_t classes, std::size_t per_class) {
  const std::size_t edges_n = classes * per_class;
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<int> labels;
  for (std::size_t e = 0; e < edges_n; ++e) {
    edges.emplace_back(static_cast<NodeId>(e),
                       static_cast<NodeId>((e + 1) % (edges_n + 1)));
    labels.push_back(static_cast<int>(e % classes));
  }
  DatasetBundle bundle;
  bundle.graph = build_graph(edges, Matrix(edges_n + 1, 0),
                             testsupport::random_matrix(edges_n, 2, 5));
  bundle.labels = std::move(labels);
  bundle.class_count = static_cast<int>(classes);
  bundle.has_labels = true;
  return bundle;
}

}  // namespace

TEST_CASE("load_dataset reads and standardizes a tiny fixture") {
  const std::string dir = testsupport::fresh_temp_dir("load");
  write_file(dir + "/edges.csv", "# comment line\n0,1\n");
  write_file(dir + "/nodes.csv", "f0\n1.0\n2.0\n");
  write_file(dir + "/feats.csv", "a,b\n0.0,1.0\n");
  const auto bundle =
      load_dataset(dir + "/edges.csv", dir + "/nodes.csv", dir + "/feats.csv");
  CHECK(bundle.graph.node_count() == 2);
  CHECK(bundle.graph.edge_count() == 1);
  CHECK_FALSE(bundle.has_labels);
  // a single row standardizes to zero
  CHECK(bundle.graph.edge_features(0)[0] == 0.0);
  CHECK(bundle.graph.edge_features(0)[1] == 0.0);
}

TEST_CASE("two-point columns standardize to -1, +1") {
  Matrix m(2, 1);
  m.at(0, 0) = 0.0;
  m.at(1, 0) = 2.0;
  standardize_columns(m);
  CHECK(m.at(0, 0) == Catch::Approx(-1.0).margin(1e-15));
  CHECK(m.at(1, 0) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("constant columns are centered, not divided") {
  Matrix m(3, 1);
  m.at(0, 0) = m.at(1, 0) = m.at(2, 0) = 4.0;
  standardize_columns(m);
  for (std::size_t i = 0; i < 3; ++i) CHECK(m.at(i, 0) == 0.0);
}

TEST_CASE("row count mismatches name the file and the counts") {
  const std::string dir = testsupport::fresh_temp_dir("mismatch");
  write_file(dir + "/edges.csv", "0,1\n1,2\n");
  write_file(dir + "/nodes.csv", "f0\n1\n1\n1\n");
  write_file(dir + "/feats.csv", "a\n0.5\n");
  try {
    load_dataset(dir + "/edges.csv", dir + "/nodes.csv", dir + "/feats.csv");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("feats.csv") != std::string::npos);
    CHECK(msg.find("1") != std::string::npos);
    CHECK(msg.find("2") != std::string::npos);
  }
}

TEST_CASE("malformed rows carry line numbers") {
  const std::string dir = testsupport::fresh_temp_dir("badrow");
  write_file(dir + "/edges.csv", "0,1\n");
  write_file(dir + "/nodes.csv", "f0\n1\nbogus\n");
  write_file(dir + "/feats.csv", "a\n0.5\n");
  try {
    load_dataset(dir + "/edges.csv", dir + "/nodes.csv", dir + "/feats.csv");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
}

TEST_CASE("labels come from the edge list or a separate file, never both") {
  const std::string dir = testsupport::fresh_temp_dir("labels");
  write_file(dir + "/edges.csv", "0,1,2\n1,2,0\n");
  write_file(dir + "/nodes.csv", "f0\n1\n1\n1\n");
  write_file(dir + "/feats.csv", "a\n0.5\n0.7\n");
  write_file(dir + "/labels.csv", "label\n1\n0\n");
  SECTION("inline labels") {
    const auto bundle =
        load_dataset(dir + "/edges.csv", dir + "/nodes.csv", dir + "/feats.csv");
    REQUIRE(bundle.has_labels);
    CHECK(bundle.labels == std::vector<int>{2, 0});
    CHECK(bundle.class_count == 3);
  }
  SECTION("separate label file") {
    write_file(dir + "/edges2.csv", "0,1\n1,2\n");
    const auto bundle = load_dataset(dir + "/edges2.csv", dir + "/nodes.csv",
                                     dir + "/feats.csv", dir + "/labels.csv");
    REQUIRE(bundle.has_labels);
    CHECK(bundle.labels == std::vector<int>{1, 0});
  }
  SECTION("both sources is an error") {
    CHECK_THROWS_AS(load_dataset(dir + "/edges.csv", dir + "/nodes.csv",
                                 dir + "/feats.csv", dir + "/labels.csv"),
                    ValidationError);
  }
}

TEST_CASE("missing files surface as I/O errors") {
  CHECK_THROWS_AS(load_dataset("/nonexistent/e.csv", "/nonexistent/n.csv",
                               "/nonexistent/f.csv"),
                  IoError);
}

TEST_CASE("splits on an 8-class dataset mirror the 160-edge protocol") {
  const auto bundle = synthetic_labeled(8, 375);  // 3000 edges
  const auto splits = make_splits(bundle, 20, 1000, 1000, 3, 99);
  REQUIRE(splits.size() == 3);
  for (const SplitSpec& s : splits) {
    CHECK(s.train.size() == 160);
    CHECK(s.val.size() == 1000);
    CHECK(s.test.size() == 1000);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 2160);  // pairwise disjoint
    // exactly 20 per class in train
    std::vector<int> per_class(8, 0);
    for (std::size_t e : s.train) per_class[static_cast<std::size_t>(bundle.labels[e])]++;
    for (int c : per_class) CHECK(c == 20);
  }
}

TEST_CASE("splits are seed-reproducible and differ across repeats") {
  const auto bundle = synthetic_labeled(6, 60);
  const auto a = make_splits(bundle, 20, 50, 50, 2, 7);
  const auto b = make_splits(bundle, 20, 50, 50, 2, 7);
  CHECK(a[0].train == b[0].train);
  CHECK(a[0].val == b[0].val);
  CHECK(a[0].test == b[0].test);
  CHECK(a[0].train != a[1].train);
  const auto c = make_splits(bundle, 20, 50, 50, 2, 8);
  CHECK(a[0].train != c[0].train);
}

TEST_CASE("a class with no edges is reported") {
  auto bundle = synthetic_labeled(3, 10);
  bundle.class_count = 4;  // class 3 exists nominally but has no edges
  try {
    make_splits(bundle, 2, 5, 5, 1, 1);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
}

TEST_CASE("desk-scale graphs shrink the requested split sizes") {
  const auto bundle = generate_barbell({});  // 50 edges, classes 21/8/21
  const auto splits = make_splits(bundle, 20, 1000, 1000, 2, 5);
  for (const SplitSpec& s : splits) {
    CHECK(s.train.size() == 12);  // per-class capped at floor(8/2) = 4
    CHECK(s.val.size() == 19);
    CHECK(s.test.size() == 19);
  }
}

TEST_CASE("barbell generation") {
  SECTION("defaults give 50 edges and 21 nodes") {
    const auto bundle = generate_barbell({});
    CHECK(bundle.graph.edge_count() == 50);
    CHECK(bundle.graph.node_count() == 21);
    CHECK(bundle.graph.edge_dim() == 200);
    CHECK(bundle.class_count == 3);
  }
  SECTION("edge count formula holds across sizes") {
    for (std::size_t c = 3; c <= 8; ++c)
      for (std::size_t m = 0; m <= 5; ++m) {
        BarbellConfig cfg;
        cfg.clique_size = c;
        cfg.path_nodes = m;
        cfg.feature_dim = 4;
        const auto bundle = generate_barbell(cfg);
        CHECK(bundle.graph.edge_count() == c * (c - 1) + m + 1);
      }
  }
  SECTION("p=0 keeps labels aligned with the structure") {
    const auto bundle = generate_barbell({});
    const std::size_t clique_edges = 21;
    for (std::size_t e = 0; e < clique_edges; ++e) CHECK(bundle.labels[e] == 0);
    for (std::size_t e = clique_edges; e < clique_edges + 8; ++e)
      CHECK(bundle.labels[e] == 1);
    for (std::size_t e = clique_edges + 8; e < 50; ++e) CHECK(bundle.labels[e] == 2);
    // structure: first 21 edges connect clique-1 nodes 0..6
    for (std::size_t e = 0; e < clique_edges; ++e) {
      CHECK(bundle.graph.edges()[e].u < 7);
      CHECK(bundle.graph.edges()[e].v < 7);
    }
  }
  SECTION("features form well-separated blobs at p=0") {
    const auto bundle = generate_barbell({});
    const std::size_t dim = bundle.graph.edge_dim();
    // class means are far apart relative to the unit within-class spread
    Vec mean0(dim, 0.0), mean2(dim, 0.0);
    for (std::size_t e = 0; e < 21; ++e)
      for (std::size_t j = 0; j < dim; ++j)
        mean0[j] += bundle.graph.edge_features(e)[j] / 21.0;
    for (std::size_t e = 29; e < 50; ++e)
      for (std::size_t j = 0; j < dim; ++j)
        mean2[j] += bundle.graph.edge_features(e)[j] / 21.0;
    double between = 0.0;
    for (std::size_t j = 0; j < dim; ++j)
      between += (mean0[j] - mean2[j]) * (mean0[j] - mean2[j]);
    CHECK(std::sqrt(between) > 20.0 * std::sqrt(static_cast<double>(dim)) / 10.0);
    // within-class deviation around the mean stays at the unit spread
    double within = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = bundle.graph.edge_features(0)[j] - mean0[j];
      within += d * d;
    }
    CHECK(std::sqrt(within / static_cast<double>(dim)) < 2.0);
  }
  SECTION("shuffling is deterministic and preserves the feature multiset") {
    BarbellConfig cfg;
    cfg.shuffle_p = 1.0;
    cfg.seed = 31337;
    const auto a = generate_barbell(cfg);
    const auto b = generate_barbell(cfg);
    CHECK(a.labels == b.labels);
    CHECK(a.graph.edge_feature_matrix().values == b.graph.edge_feature_matrix().values);

    cfg.shuffle_p = 0.0;
    const auto clean = generate_barbell(cfg);
    // multiset of (feature row, label) pairs is preserved by swapping
    const auto rows_of = [](const DatasetBundle& bundle) {
      std::multiset<std::pair<std::vector<double>, int>> rows;
      for (std::size_t e = 0; e < bundle.graph.edge_count(); ++e) {
        const auto row = bundle.graph.edge_features(e);
        rows.insert({{row.begin(), row.end()}, bundle.labels[e]});
      }
      return rows;
    };
    CHECK(rows_of(a) == rows_of(clean));
    CHECK(a.labels != clean.labels);  // p=1 actually moved things
  }
  SECTION("p=0.5 moves roughly half as many labels around") {
    BarbellConfig cfg;
    cfg.shuffle_p = 0.5;
    cfg.seed = 4;
    const auto noisy = generate_barbell(cfg);
    cfg.shuffle_p = 0.0;
    const auto clean = generate_barbell(cfg);
    std::size_t moved = 0;
    for (std::size_t e = 0; e < 50; ++e)
      if (noisy.labels[e] != clean.labels[e]) ++moved;
    CHECK(moved > 10);
  }
  SECTION("invalid p is a config error") {
    BarbellConfig cfg;
    cfg.shuffle_p = 1.5;
    CHECK_THROWS_AS(generate_barbell(cfg), ConfigError);
  }
}

TEST_CASE("edge labels derive from node labels") {
  SECTION("shared class propagates") {
    CHECK(derive_edge_labels({2, 2}, {{0, 1}}) == std::vector<int>{2});
  }
  SECTION("cross-class edges get the extra class") {
    const auto labels = derive_edge_labels({1, 3, 3, 1}, {{0, 1}, {1, 2}, {3, 0}});
    CHECK(labels == std::vector<int>{4, 3, 1});
  }
  SECTION("seven node classes allow exactly eight edge labels") {
    std::vector<int> node_labels;
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (int c = 0; c < 7; ++c) {
      node_labels.push_back(c);
      node_labels.push_back(c);
    }
    // same-class edges for every class plus cross edges
    for (NodeId i = 0; i < 7; ++i) edges.emplace_back(2 * i, 2 * i + 1);
    edges.emplace_back(0, 2);
    const auto labels = derive_edge_labels(node_labels, edges);
    std::set<int> distinct(labels.begin(), labels.end());
    CHECK(distinct.size() == 8);
    CHECK(*distinct.rbegin() == 7);
  }
  SECTION("unlabeled nodes are an error") {
    CHECK_THROWS_AS(derive_edge_labels({0, -1}, {{0, 1}}), ValidationError);
  }
}

TEST_CASE("edge subgraphs preserve features and report the mapping") {
  const auto bundle = generate_barbell({});
  const std::vector<std::size_t> keep{0, 5, 30, 49};
  const Subgraph sub = edge_subgraph(bundle.graph, keep);
  CHECK(sub.graph.edge_count() == 4);
  CHECK(sub.graph.node_count() == bundle.graph.node_count());
  CHECK(sub.source_edge == keep);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const auto want = bundle.graph.edge_features(keep[i]);
    const auto got = sub.graph.edge_features(i);
    for (std::size_t j = 0; j < want.size(); ++j) CHECK(got[j] == want[j]);
  }
}
