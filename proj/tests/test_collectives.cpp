#include <doctest.h>

#include <sstream>
#include <vector>

#include "helpers.hpp"
#include "tagc/collectives.hpp"
#include "tagc/hash.hpp"
#include "tagc/index.hpp"
#include "tagc/sketch.hpp"

using namespace tagc;
using testing_oracles::bit_equal;

TEST_SUITE("collectives") {

TEST_CASE("all_reduce sums in rank order and reaches everyone") {
  World w(2, WorldMode::sequential);
  const std::vector<std::vector<float>> payloads = {{1.0f, 2.0f}, {10.0f, 20.0f}};
  const std::vector<float> got = w.all_reduce_sum(payloads, {"t", 2, std::nullopt});
  CHECK(got == std::vector<float>{11.0f, 22.0f});
}

TEST_CASE("packed 1-bit indices collide under integer addition") {
  World w(2, WorldMode::sequential);
  const std::vector<std::vector<std::uint32_t>> payloads = {{1u}, {1u}};
  const std::vector<std::uint32_t> got = w.all_reduce_sum(payloads, {"idx", 32, std::nullopt});
  CHECK(got[0] == 2u);
}

TEST_CASE("all_reduce of a 1-bit index charges two bits per parameter") {
  const std::uint32_t n = 320;  // divisible by 32, packed words carry no padding
  World w(2, WorldMode::sequential);
  std::vector<float> v(n, 1.0f);
  const Index idx = Index::create(v, 1);
  const std::vector<std::vector<std::uint32_t>> payloads = {idx.words, idx.words};
  w.all_reduce_sum(payloads, {"index/x", n, idx.payload_bits()});
  const LedgerRow* row = w.ledger().find(CollectiveOp::all_reduce, "index/x");
  REQUIRE(row != nullptr);
  CHECK(row->payload_bits == n);
  CHECK(row->charged_bits == 2 * n);
  CHECK(row->bits_per_param_per_rank() == 2.0);
}

TEST_CASE("reduce delivers the rank-ordered sum to the root") {
  World w(3, WorldMode::sequential);
  const std::vector<std::vector<float>> payloads = {{1.0f}, {2.0f}, {3.0f}};
  const std::vector<float> got = w.reduce(payloads, 1, {"r", 1, std::nullopt});
  CHECK(got == std::vector<float>{6.0f});
  CHECK_THROWS_AS(w.reduce(payloads, 3, {"r", 1, std::nullopt}), std::invalid_argument);
}

TEST_CASE("a 2x sketch reduce charges sixteen bits per parameter") {
  const std::uint32_t n = 480;  // divisible by ratio*rows
  World w(2, WorldMode::sequential);
  const SketchGeometry geom = sketch_geometry(n, 2);
  std::vector<float> v(n, 0.0f);
  v[5] = 1.0f;
  const CountSketch s = CountSketch::compress(v, geom, 1);
  const std::vector<std::vector<float>> payloads = {s.values, s.values};
  w.reduce(payloads, 0, {"sketch/x", n, std::nullopt});
  const LedgerRow* row = w.ledger().find(CollectiveOp::reduce, "sketch/x");
  REQUIRE(row != nullptr);
  CHECK(row->bits_per_param_per_rank() == 16.0);
}

TEST_CASE("reduce of compatible sketches equals folded sketch_add") {
  Rng rng(3);
  const std::uint32_t n = 120;
  const SketchGeometry geom = sketch_geometry(n, 2);
  std::vector<CountSketch> sketches;
  std::vector<std::vector<float>> payloads;
  for (int r = 0; r < 4; ++r) {
    std::vector<float> v(n, 0.0f);
    for (int i = 0; i < 25; ++i)
      v[rng.next_below(n)] = static_cast<float>(rng.next_double() * 2.0 - 1.0);
    sketches.push_back(CountSketch::compress(v, geom, 77));
    payloads.push_back(sketches.back().values);
  }
  World w(4, WorldMode::sequential);
  const std::vector<float> reduced = w.reduce(payloads, 0, {"s", n, std::nullopt});
  CountSketch folded = sketches[0];
  for (int r = 1; r < 4; ++r) folded = sketch_add(folded, sketches[r]);
  CHECK(bit_equal(reduced, folded.values));
}

TEST_CASE("reduce_scatter and all_gather round shard slices") {
  World w(2, WorldMode::sequential);
  const std::vector<std::vector<float>> payloads = {{1, 2, 3, 4}, {10, 20, 30, 40}};
  const auto slices = w.reduce_scatter(payloads, {"rs", 4, std::nullopt});
  CHECK(slices[0] == std::vector<float>{11.0f, 22.0f});
  CHECK(slices[1] == std::vector<float>{33.0f, 44.0f});
  const std::vector<std::vector<float>> ins = {slices[0], slices[1]};
  const std::vector<float> gathered = w.all_gather(ins, {"ag", 4, std::nullopt});
  CHECK(gathered == std::vector<float>{11.0f, 22.0f, 33.0f, 44.0f});
}

TEST_CASE("baseline full-gradient exchange reports 32 bits per parameter") {
  const std::uint32_t n = 64;
  World w(2, WorldMode::sequential);
  const std::vector<std::vector<float>> payloads = {std::vector<float>(n, 1.0f),
                                                    std::vector<float>(n, 2.0f)};
  w.reduce_scatter(payloads, {"grad/x", n, std::nullopt});
  const LedgerRow* row = w.ledger().find(CollectiveOp::reduce_scatter, "grad/x");
  REQUIRE(row != nullptr);
  CHECK(row->bits_per_param_per_rank() == 32.0);
}

TEST_CASE("uneven reduce_scatter counts deliver whole shards") {
  World w(3, WorldMode::sequential);
  const std::vector<std::vector<float>> payloads = {{1, 2}, {10, 20}, {100, 200}};
  const std::vector<std::size_t> counts = {0, 2, 0};
  const auto slices = w.reduce_scatter(payloads, counts, {"rs", 2, std::nullopt});
  CHECK(slices[0].empty());
  CHECK(slices[1] == std::vector<float>{111.0f, 222.0f});
  CHECK(slices[2].empty());
}

TEST_CASE("validation errors") {
  World w(2, WorldMode::sequential);
  const std::vector<std::vector<float>> odd = {{1, 2, 3}, {4, 5, 6}};
  CHECK_THROWS_AS(w.reduce_scatter(odd, {"x", 3, std::nullopt}), std::invalid_argument);
  const std::vector<std::vector<float>> ragged = {{1, 2}, {4}};
  CHECK_THROWS_AS(w.all_reduce_sum(ragged, {"x", 2, std::nullopt}), std::invalid_argument);
  const std::vector<std::vector<float>> wrong_count = {{1, 2}};
  CHECK_THROWS_AS(w.all_reduce_sum(wrong_count, {"x", 2, std::nullopt}), std::invalid_argument);
  CHECK_THROWS_AS(World(0, WorldMode::sequential), std::invalid_argument);
}

TEST_CASE("all_reduce equals reduce at every root") {
  Rng rng(9);
  const std::uint32_t n = 33;
  std::vector<std::vector<float>> payloads;
  for (int r = 0; r < 4; ++r) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.next_double() * 2.0 - 1.0);
    payloads.push_back(std::move(v));
  }
  World w(4, WorldMode::sequential);
  const std::vector<float> ar = w.all_reduce_sum(payloads, {"a", n, std::nullopt});
  for (std::uint32_t root = 0; root < 4; ++root) {
    const std::vector<float> rd = w.reduce(payloads, root, {"b", n, std::nullopt});
    CHECK(bit_equal(ar, rd));
  }
}

TEST_CASE("sequential and parallel worlds agree bit for bit") {
  auto run = [](WorldMode mode) {
    World w(4, mode);
    std::vector<std::vector<float>> locals(4);
    w.for_each_rank([&](std::uint32_t r) {
      Rng rng(splitmix64(900 + r));
      locals[r].resize(257);
      for (auto& x : locals[r]) x = static_cast<float>(rng.next_double() * 2.0 - 1.0);
    });
    std::vector<float> merged = w.all_reduce_sum(locals, {"m", 257, std::nullopt});
    std::vector<std::vector<float>> squared(4);
    w.for_each_rank([&](std::uint32_t r) {
      squared[r] = merged;
      for (auto& x : squared[r]) x = x * x + static_cast<float>(r);
    });
    std::vector<float> reduced = w.reduce(squared, 2, {"n", 257, std::nullopt});
    return std::make_pair(reduced, w.ledger());
  };
  const auto [buf_seq, ledger_seq] = run(WorldMode::sequential);
  const auto [buf_par, ledger_par] = run(WorldMode::parallel);
  CHECK(bit_equal(buf_seq, buf_par));
  CHECK(ledger_seq == ledger_par);
}

TEST_CASE("volume reconstruction at 2x compression, both index widths") {
  // All-Reduce both structures vs All-Reduce index + Reduce sketch, measured
  // through the ledger on real payloads.
  auto probe = [](std::uint32_t width, bool sketch_all_reduce) {
    const std::uint32_t n = 960;  // divisible by 32 and by rows*ratio
    World w(2, WorldMode::sequential);
    Rng rng(5);
    std::vector<std::vector<float>> vals(2, std::vector<float>(n, 0.0f));
    for (int r = 0; r < 2; ++r)
      for (int i = 0; i < 100; ++i)
        vals[r][rng.next_below(n)] = static_cast<float>(rng.next_double() + 0.25);
    std::vector<std::vector<std::uint32_t>> words;
    for (int r = 0; r < 2; ++r) words.push_back(Index::create(vals[r], width).words);
    w.all_reduce_sum(words, {"index/p", n, static_cast<std::uint64_t>(n) * width});
    const SketchGeometry geom = sketch_geometry(n, 2);
    std::vector<std::vector<float>> sketches;
    for (int r = 0; r < 2; ++r)
      sketches.push_back(CountSketch::compress(vals[r], geom, 1).values);
    if (sketch_all_reduce) {
      w.all_reduce_sum(sketches, {"sketch/p", n, std::nullopt});
    } else {
      w.reduce(sketches, 0, {"sketch/p", n, std::nullopt});
    }
    // Index and sketch cover the same parameters, so their per-parameter
    // rates add.
    return w.ledger().bits_per_param_per_rank("index/") +
           w.ledger().bits_per_param_per_rank("sketch/");
  };
  CHECK(probe(4, true) == 40.0);   // all-All-Reduce, 4-bit
  CHECK(probe(4, false) == 24.0);  // index All-Reduce + sketch Reduce
  CHECK(probe(1, true) == 34.0);
  CHECK(probe(1, false) == 18.0);
}

TEST_CASE("ledger export formats") {
  World w(2, WorldMode::sequential);
  const std::vector<std::vector<float>> payloads = {{1.0f}, {2.0f}};
  w.all_reduce_sum(payloads, {"x", 1, std::nullopt});
  std::ostringstream csv;
  w.ledger().to_csv(csv);
  CHECK(csv.str() ==
        "op,tag,calls,payload_bits,charged_bits,bits_per_param_per_rank\n"
        "all_reduce,x,1,32,64,64\n");
  const auto j = w.ledger().to_json();
  CHECK(j.size() == 1);
  CHECK(j[0]["op"] == "all_reduce");
  CHECK(j[0]["charged_bits"] == 64);
}

}  // TEST_SUITE
