// A short walk through the library at small scale: build a YES and a NO
// instance, compare their maximum matchings, probe one through the query
// oracle, and play a tree game.

#include <iostream>

#include "lcalab/lcalab.hpp"

using namespace lcalab;

int main() {
  const auto yes = build_params(1024, 4, 64, 2, Variant::full_hierarchy, World::yes, 42);
  for (const auto& w : regime_warnings(yes)) std::cout << "note: " << w << "\n";

  for (auto world : {World::yes, World::no}) {
    const auto inst = assemble_instance(yes.with_world(world));
    const auto audit = audit_instance(inst);
    const auto m = hopcroft_karp(inst);
    std::cout << to_string(world) << ": n=" << inst.n() << " edges=" << inst.edge_count()
              << " broken=" << inst.broken.size() << " audit=" << (audit.ok() ? "clean" : "violations")
              << " mu=" << m.size << "\n";
  }
  std::cout << "bounds: YES >= " << to_double(yes_matching_bound(yes.public_view()))
            << ", NO <= " << to_double(no_matching_bound(yes.public_view())) << "\n";

  // The oracle only exposes public ids and adjacency-list queries.
  const auto inst = assemble_instance(yes);
  Oracle o(inst, 7);
  const auto v = o.random_vertex();
  std::cout << "vertex " << v << " first neighbors:";
  for (std::uint32_t i = 1; i <= 4; ++i) {
    if (auto u = o.query(v, i)) {
      std::cout << " " << *u;
    } else {
      std::cout << " _";
    }
  }
  std::cout << " (" << o.query_count() << " queries)\n";

  // Tree game: grow 30 nodes breadth first and look at the root posterior.
  auto g = new_game(yes.public_view(), World::yes, 3);
  grow(g, make_game_policy("bfs", 3), 30, 4);
  GameReferee ref(g);
  const auto post = root_posterior(g);
  std::cout << "game: " << g.size() << " nodes, root " << ref.root_label().name() << ", posterior";
  for (auto label : top_level_labels(4)) std::cout << " " << label.name() << "=" << post.at(label);
  std::cout << "\n";
}
