#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "seqrank/edurank.hpp"
#include "seqrank/rng.hpp"

using namespace seqrank;

namespace {

QuestionId q(const std::string& s) { return QuestionId{s}; }
StudentId s(const std::string& v) { return StudentId{v}; }

PartialOrder total(const StudentId& owner, std::initializer_list<std::string> names) {
  std::vector<std::vector<QuestionId>> groups;
  for (const std::string& n : names) groups.push_back({QuestionId{n}});
  return PartialOrder(owner, std::move(groups));
}

// Random EduRank instance over a shared question universe.
struct Instance {
  StudentId target;
  std::set<QuestionId> candidates;
  std::map<StudentId, PartialOrder> orders;
  int memory_size;
};

Instance random_instance(Rng& rng) {
  Instance inst;
  int n_students = 2 + static_cast<int>(rng.index(3));  // 2..4 incl. target
  int n_questions = 5 + static_cast<int>(rng.index(4)); // universe 5..8
  int n_candidates = 1 + static_cast<int>(rng.index(5)); // 1..5
  std::vector<QuestionId> universe;
  for (int i = 0; i < n_questions; ++i) universe.push_back(oracles::question(i));
  for (int st = 0; st < n_students; ++st) {
    StudentId sid{"s" + std::to_string(st)};
    // each student ordered a random subset of the universe
    std::vector<QuestionId> subset = universe;
    rng.shuffle(subset);
    std::size_t keep = 1 + rng.index(subset.size());
    subset.resize(keep);
    inst.orders.emplace(sid, oracles::random_partial_order(rng, sid, subset));
  }
  inst.target = s("s0");
  std::vector<QuestionId> cand_pool = universe;
  rng.shuffle(cand_pool);
  for (int i = 0; i < n_candidates; ++i) inst.candidates.insert(cand_pool[i]);
  inst.memory_size = 1 + static_cast<int>(rng.index(4));
  return inst;
}

}  // namespace

TEST_SUITE_BEGIN("edurank");

TEST_CASE("gamma verdicts") {
  CHECK(edurank::gamma(q("a"), q("b"), total(s("s1"), {"a", "b"})) == 1);
  CHECK(edurank::gamma(q("a"), q("b"), total(s("s1"), {"b", "a"})) == -1);
  PartialOrder tied(s("s1"), {{q("a"), q("b")}});
  CHECK(edurank::gamma(q("a"), q("b"), tied) == 0);
  CHECK(edurank::gamma(q("a"), q("x"), total(s("s1"), {"a", "b"})) == 0);
}

TEST_CASE("similarity of identical and disjoint orders") {
  PartialOrder target = total(s("s1"), {"a", "b", "c"});
  CHECK(edurank::similarity(target, total(s("s2"), {"a", "b", "c"})) == doctest::Approx(1.0));
  CHECK(edurank::similarity(target, total(s("s2"), {"x", "y"})) == 0.0);
  CHECK(edurank::similarity(target, total(s("s2"), {"a", "c", "b"})) == doctest::Approx(0.5));
}

TEST_CASE("similarity restricted to the common item set") {
  PartialOrder target = total(s("s1"), {"a", "b", "c", "d"});
  // neighbor ordered b,a plus unrelated items; common = {a,b} reversed
  PartialOrder neighbor = total(s("s2"), {"x", "b", "a", "y"});
  CHECK(edurank::similarity(target, neighbor) == doctest::Approx(-1.0));
}

TEST_CASE("neighbor selection orders by similarity then id") {
  std::map<StudentId, PartialOrder> orders;
  orders.emplace(s("t"), total(s("t"), {"a", "b", "c"}));
  orders.emplace(s("n1"), total(s("n1"), {"a", "b", "c"}));   // sim 1
  orders.emplace(s("n2"), total(s("n2"), {"c", "b", "a"}));   // sim -1
  orders.emplace(s("n3"), total(s("n3"), {"a", "c", "b"}));   // sim 0.5
  edurank::NeighborSet set = edurank::select_neighbors(s("t"), orders, 2);
  REQUIRE(set.neighbors.size() == 2);
  CHECK(set.neighbors[0].first == s("n1"));
  CHECK(set.neighbors[1].first == s("n3"));
  CHECK_THROWS_AS(edurank::select_neighbors(s("t"), orders, 0), std::invalid_argument);
}

TEST_CASE("relative_vote sign aggregation") {
  std::map<StudentId, PartialOrder> orders;
  orders.emplace(s("n1"), total(s("n1"), {"a", "b"}));
  edurank::NeighborSet one{s("t"), {{s("n1"), 1.0}}, 1};
  CHECK(edurank::relative_vote(q("a"), q("b"), one, orders) == 1);

  // sims (0.5, 0.2, 0.1) voting (+1, -1, 0) -> sign(0.3) = 1
  orders.emplace(s("n2"), total(s("n2"), {"b", "a"}));
  PartialOrder tied(s("n3"), {{q("a"), q("b")}});
  orders.emplace(s("n3"), tied);
  edurank::NeighborSet three{s("t"), {{s("n1"), 0.5}, {s("n2"), 0.2}, {s("n3"), 0.1}}, 3};
  CHECK(edurank::relative_vote(q("a"), q("b"), three, orders) == 1);

  // equal sims, opposite votes -> exact cancellation
  edurank::NeighborSet two{s("t"), {{s("n1"), 0.7}, {s("n2"), 0.7}}, 2};
  CHECK(edurank::relative_vote(q("a"), q("b"), two, orders) == 0);
}

TEST_CASE("relative_vote is antisymmetric") {
  Rng rng(211);
  std::vector<QuestionId> items;
  for (int i = 0; i < 5; ++i) items.push_back(oracles::question(i));
  for (int trial = 0; trial < 100; ++trial) {
    std::map<StudentId, PartialOrder> orders;
    edurank::NeighborSet set;
    set.target = s("t");
    set.memory_size = 3;
    for (int n = 0; n < 3; ++n) {
      StudentId sid{"n" + std::to_string(n)};
      orders.emplace(sid, oracles::random_partial_order(rng, sid, items));
      set.neighbors.emplace_back(sid, rng.uniform(-1.0, 1.0));
    }
    for (const QuestionId& a : items) {
      for (const QuestionId& b : items) {
        if (a == b) continue;
        CHECK(edurank::relative_vote(a, b, set, orders) ==
              -edurank::relative_vote(b, a, set, orders));
      }
    }
  }
}

TEST_CASE("copeland tally from a fixed vote matrix") {
  // rv(a,b)=1, rv(a,c)=1, rv(b,c)=-1 -> c(a)=2, c(c)=0, c(b)=-2
  auto vote = [](const QuestionId& x, const QuestionId& y) {
    auto key = x.value + y.value;
    if (key == "ab") return 1;
    if (key == "ac") return 1;
    if (key == "bc") return -1;
    if (key == "ba") return -1;
    if (key == "ca") return -1;
    if (key == "cb") return 1;
    return 0;
  };
  edurank::CopelandTable table = edurank::tally_votes({q("a"), q("b"), q("c")}, vote);
  CHECK(table.scores.at(q("a")) == 2);
  CHECK(table.scores.at(q("b")) == -2);
  CHECK(table.scores.at(q("c")) == 0);
  PartialOrder order = edurank::order_from_copeland(s("t"), table);
  CHECK(order.linearize() == std::vector<QuestionId>{q("a"), q("c"), q("b")});
}

TEST_CASE("rank on a single candidate") {
  std::map<StudentId, PartialOrder> orders;
  orders.emplace(s("t"), total(s("t"), {"a", "b"}));
  orders.emplace(s("n"), total(s("n"), {"a", "b", "x"}));
  PartialOrder order = edurank::rank(s("t"), {q("x")}, orders, 1);
  CHECK(order.groups() == std::vector<std::vector<QuestionId>>{{q("x")}});
  CHECK_THROWS_AS(edurank::rank(s("t"), {}, orders, 1), std::invalid_argument);
}

TEST_CASE("target with empty history yields one all-tied group") {
  std::map<StudentId, PartialOrder> orders;
  orders.emplace(s("t"), PartialOrder(s("t")));
  orders.emplace(s("n1"), total(s("n1"), {"a", "b", "c"}));
  orders.emplace(s("n2"), total(s("n2"), {"c", "a", "b"}));
  PartialOrder order = edurank::rank(s("t"), {q("a"), q("b"), q("c")}, orders, 2);
  CHECK(order.groups().size() == 1);
  CHECK(order.item_count() == 3);
}

TEST_CASE("unanimous neighbors reproduce their shared order") {
  Rng rng(223);
  for (int trial = 0; trial < 40; ++trial) {
    // target's own history, shared by all neighbors so similarity is 1
    std::vector<QuestionId> history;
    for (int i = 0; i < 4; ++i) history.push_back(oracles::question(100 + i));
    PartialOrder target_order = oracles::random_total_order(rng, s("t"), history);

    std::vector<QuestionId> cand;
    for (int i = 0; i < 4; ++i) cand.push_back(oracles::question(i));
    std::vector<QuestionId> shared = cand;
    rng.shuffle(shared);

    std::map<StudentId, PartialOrder> orders;
    orders.emplace(s("t"), target_order);
    int n_neighbors = 1 + static_cast<int>(rng.index(3));
    for (int n = 0; n < n_neighbors; ++n) {
      // neighbor order: target's history order followed by the shared
      // candidate order; restriction to the history equals the target's
      std::vector<std::vector<QuestionId>> groups;
      for (const auto& g : target_order.groups()) groups.push_back(g);
      for (const QuestionId& c : shared) groups.push_back({c});
      StudentId sid{"n" + std::to_string(n)};
      orders.emplace(sid, PartialOrder(sid, std::move(groups)));
    }
    PartialOrder result =
        edurank::rank(s("t"), std::set<QuestionId>(cand.begin(), cand.end()), orders,
                      1 + static_cast<int>(rng.index(3)));
    CHECK(result.linearize() == shared);
    CHECK(result.groups().size() == cand.size());
  }
}

TEST_CASE("copeland bound holds") {
  Rng rng(227);
  for (int trial = 0; trial < 60; ++trial) {
    Instance inst = random_instance(rng);
    PartialOrder order = edurank::rank(inst.target, inst.candidates, inst.orders,
                                       inst.memory_size);
    CHECK(order.item_set() == inst.candidates);
    edurank::NeighborSet neighbors =
        edurank::select_neighbors(inst.target, inst.orders, inst.memory_size);
    edurank::CopelandTable table =
        edurank::tally_votes(inst.candidates, [&](const QuestionId& a, const QuestionId& b) {
          return edurank::relative_vote(a, b, neighbors, inst.orders);
        });
    long sum = 0;
    for (const auto& [question, score] : table.scores) {
      CHECK(std::abs(score) <= static_cast<int>(inst.candidates.size()) - 1);
      sum += score;
    }
    CHECK(sum == 0);  // contributions of (q,l) and (l,q) cancel pairwise
  }
}

TEST_CASE("rank is neutral under question relabeling") {
  Rng rng(229);
  for (int trial = 0; trial < 30; ++trial) {
    Instance inst = random_instance(rng);
    PartialOrder base = edurank::rank(inst.target, inst.candidates, inst.orders,
                                      inst.memory_size);

    // order-preserving relabel keeps the documented tie-break aligned
    auto relabel_q = [](const QuestionId& question) {
      return QuestionId{"z" + question.value};
    };
    std::map<StudentId, PartialOrder> relabeled;
    for (const auto& [student, order] : inst.orders) {
      std::vector<std::vector<QuestionId>> groups;
      for (const auto& group : order.groups()) {
        std::vector<QuestionId> g;
        for (const QuestionId& item : group) g.push_back(relabel_q(item));
        groups.push_back(std::move(g));
      }
      relabeled.emplace(student, PartialOrder(student, std::move(groups)));
    }
    std::set<QuestionId> candidates;
    for (const QuestionId& c : inst.candidates) candidates.insert(relabel_q(c));
    PartialOrder mapped = edurank::rank(inst.target, candidates, relabeled, inst.memory_size);

    std::vector<std::vector<QuestionId>> expected;
    for (const auto& group : base.groups()) {
      std::vector<QuestionId> g;
      for (const QuestionId& item : group) g.push_back(relabel_q(item));
      expected.push_back(std::move(g));
    }
    CHECK(mapped.groups() == expected);
  }
}

TEST_CASE("rank matches the brute-force oracle on random instances") {
  Rng rng(233);
  for (int trial = 0; trial < 100; ++trial) {
    Instance inst = random_instance(rng);
    PartialOrder got = edurank::rank(inst.target, inst.candidates, inst.orders,
                                     inst.memory_size);
    PartialOrder expected = oracles::edurank_brute_force(inst.target, inst.candidates,
                                                         inst.orders, inst.memory_size);
    CHECK(got.groups() == expected.groups());
  }
}

TEST_SUITE_END();
