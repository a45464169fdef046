#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "redcheck/transforms.hpp"

using namespace redcheck;

namespace {

std::string slurp(const std::string& name) {
  std::ifstream in(std::string(REDCHECK_CORPUS) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ReducerProgram load(const std::string& name) { return parse_program(slurp(name)); }

const std::vector<std::string> kLinear = {"max",   "sum",   "cnt",         "first",           "last",
                                          "id",    "min",   "range",       "sum_above_first", "max_count",
                                          "second", "sum_minus_max", "sum_pair"};

void all_words(std::size_t max_len, Value lo, Value hi, const std::function<void(const std::vector<Value>&)>& f) {
  std::vector<Value> w;
  std::function<void()> rec = [&] {
    f(w);
    if (w.size() == max_len) return;
    for (Value v = lo; v <= hi; ++v) {
      w.push_back(v);
      rec();
      w.pop_back();
    }
  };
  rec();
}

Valuation random_env(const ReducerProgram& p, std::mt19937& rng) {
  std::uniform_int_distribution<Value> d(-3, 3);
  Valuation env;
  for (const auto& v : all_variables(p)) env[v] = d(rng);
  return env;
}

std::optional<Value> as_single(const Outcome& o) {
  if (!o) return std::nullopt;
  return o->front();
}

std::vector<Value> swapped(std::vector<Value> w) {
  if (w.size() >= 2) std::swap(w[0], w[1]);
  return w;
}

std::vector<Value> rotated(std::vector<Value> w) {
  if (!w.empty()) std::rotate(w.begin(), w.begin() + 1, w.end());
  return w;
}

}  // namespace

TEST(Translate, AgreesWithInterpreter) {
  std::mt19937 rng(7);
  for (const auto& name : kLinear) {
    SCOPED_TRACE(name);
    auto p = load(name + ".red");
    Snt s = program_to_snt(p);
    EXPECT_TRUE(validate(s).empty()) << to_text(s);
    for (int trial = 0; trial < 3; ++trial) {
      Valuation env = random_env(p, rng);
      all_words(5, -2, 2, [&](const std::vector<Value>& w) {
        EXPECT_EQ(run(s, w, env), as_single(interpret(p, w, env))) << "word of length " << w.size();
      });
    }
  }
}

TEST(Translate, StateNamesFollowBfs) {
  Snt s = program_to_snt(load("max.red"));
  ASSERT_EQ(s.states.size(), 3u);
  EXPECT_EQ(s.states[0], "q0");
  EXPECT_EQ(s.states[2], "q2");
  EXPECT_TRUE(s.output[2].has_value());
  EXPECT_EQ(s.initial, 0u);
}

TEST(Translate, LoopFirstProgramIsUnrolled) {
  auto p = parse_program("reducer s { loop { y += cur; next; } ret y; }");
  Snt s = program_to_snt(p);
  for (std::size_t k : s.outgoing(s.initial)) EXPECT_FALSE(s.transitions[k].end);
  EXPECT_EQ(run(s, {}, std::map<std::string, Value>{{"y", 4}}), std::nullopt);
  EXPECT_EQ(run(s, {1, 2}, std::map<std::string, Value>{{"y", 4}}), 7);
}

TEST(Translate, NonlinearUpdateIsUnsupported) {
  auto p = parse_program("reducer s { x := cur; next; loop { y += cur * cur; next; } ret y; }");
  EXPECT_THROW(program_to_snt(p), UnsupportedError);
}

TEST(Restrict, UndefinedBelowTwo) {
  for (const auto& name : kLinear) {
    SCOPED_TRACE(name);
    auto p = load(name + ".red");
    Snt s = program_to_snt(p);
    Snt r = restrict_min_length(s);
    EXPECT_TRUE(validate(r).empty()) << to_text(r);
    all_words(4, -2, 2, [&](const std::vector<Value>& w) {
      auto expect = w.size() < 2 ? std::nullopt : run(s, w, std::map<std::string, Value>{});
      EXPECT_EQ(run(r, w, std::map<std::string, Value>{}), expect);
    });
  }
}

TEST(SwapRotate, SimulateThePermutedWord) {
  std::mt19937 rng(11);
  for (const auto& name : kLinear) {
    SCOPED_TRACE(name);
    auto p = load(name + ".red");
    Snt r = restrict_min_length(program_to_snt(p));
    Snt s1 = build_swap_snt(r);
    Snt s2 = build_rotate_snt(r);
    EXPECT_TRUE(validate(s1).empty()) << to_text(s1);
    EXPECT_TRUE(validate(s2).empty()) << to_text(s2);
    for (int trial = 0; trial < 2; ++trial) {
      Valuation env = random_env(p, rng);
      all_words(5, -2, 2, [&](const std::vector<Value>& w) {
        EXPECT_EQ(run(s1, w, env), run(r, swapped(w), env));
        EXPECT_EQ(run(s2, w, env), run(r, rotated(w), env));
      });
    }
  }
}

TEST(SwapRotate, FreshVariableAvoidsClashes) {
  Snt s = parse_snt(
      "snt t {\n"
      "init q0;\n"
      "control x, x';\n"
      "q0 -> q1 [true] { x := cur; }\n"
      "q1 -> q1 [cur > x] { x := cur; }\n"
      "q1 -> q1 [cur < x] { }\n"
      "q1 -> q1 [cur = x] { }\n"
      "q1 -> q2 [end] { }\n"
      "output q2 = x;\n"
      "}\n");
  Snt s1 = build_swap_snt(s);
  EXPECT_EQ(s1.control.back(), "x''");
}

TEST(Product, OutputIsDifference) {
  auto a = program_to_snt(load("max.red"));
  auto b = program_to_snt(load("last.red"));
  Snt pr = product(a, b);
  all_words(4, -2, 2, [&](const std::vector<Value>& w) {
    auto oa = run(a, w, std::map<std::string, Value>{});
    auto ob = run(b, w, std::map<std::string, Value>{});
    auto o = run(pr, w, std::map<std::string, Value>{});
    if (oa && ob)
      EXPECT_EQ(o, *oa - *ob);
    else if (oa || ob)
      EXPECT_EQ(o, 1);
    else
      EXPECT_EQ(o, std::nullopt);
  });
}

TEST(Product, DeadSideKeepsOtherRunning) {
  // a is stuck on a second element that is not larger; b accepts everything
  Snt a = parse_snt(
      "snt t {\n"
      "init q0;\n"
      "control x;\n"
      "q0 -> q1 [true] { x := cur; }\n"
      "q1 -> q1 [cur > x] { x := cur; }\n"
      "q1 -> q2 [end] { }\n"
      "output q2 = x;\n"
      "}\n");
  Snt b = program_to_snt(load("max.red"));
  Snt pr = product(a, b);
  EXPECT_EQ(run(pr, {1, 3, 2}, std::map<std::string, Value>{}), 1);
  EXPECT_EQ(run(pr, {1, 2, 3}, std::map<std::string, Value>{}), 0);
  EXPECT_EQ(run(pr, {}, std::map<std::string, Value>{}), std::nullopt);
}

TEST(Product, LinksSameNamedVariables) {
  auto a = program_to_snt(load("sum.red"));
  Snt pr = product(a, build_swap_snt(a));
  auto it = std::find(pr.links.begin(), pr.links.end(), std::make_pair(std::string("sum.1"), std::string("sum.2")));
  EXPECT_NE(it, pr.links.end());
}

TEST(Normalize, PreservesSemanticsUnderItsPreorder) {
  std::mt19937 rng(3);
  for (const auto& name : kLinear) {
    SCOPED_TRACE(name);
    auto p = load(name + ".red");
    Snt s = restrict_min_length(program_to_snt(p));
    Snt pr = product(s, build_swap_snt(s));
    for (const auto& n : normalize(pr)) {
      for (std::size_t q = 0; q < n.snt.states.size(); ++q)
        for (std::size_t k : n.snt.outgoing(q)) {
          const auto& t = n.snt.transitions[k];
          if (t.end) {
            EXPECT_TRUE(t.guard.empty());
          } else {
            EXPECT_EQ(t.guard.size(), pr.num_control());
          }
        }
      for (int trial = 0; trial < 40; ++trial) {
        std::uniform_int_distribution<Value> d(-3, 3);
        SntValuation v{std::vector<Value>(pr.num_control()), std::vector<Value>(pr.num_data())};
        for (auto& x : v.control) x = d(rng);
        for (auto& y : v.data) y = d(rng);
        apply_links(pr, v);
        if (!n.initial.satisfied_by(v.control)) continue;
        std::uniform_int_distribution<int> len(0, 5);
        std::vector<Value> w(static_cast<std::size_t>(len(rng)));
        for (auto& x : w) x = d(rng);
        EXPECT_EQ(run(n.snt, w, v), run(pr, w, v));
      }
    }
  }
}

TEST(Normalize, InitialPreordersRespectLinks) {
  Snt s = parse_snt(
      "snt t {\n"
      "init q0;\n"
      "control a, b, c;\n"
      "link a b;\n"
      "q0 -> q1 [end] { }\n"
      "output q1 = 0;\n"
      "}\n");
  auto ts = initial_preorders(s);
  EXPECT_EQ(ts.size(), 3u);
  for (const auto& t : ts) EXPECT_TRUE(t.equiv(0, 1));
}

TEST(Multipass, MadSplit) {
  auto p = load("mad.red");
  auto sp = check_multipass(p);
  std::vector<std::string> crossing = sp.crossing;
  std::sort(crossing.begin(), crossing.end());
  EXPECT_EQ(crossing, (std::vector<std::string>{"avg", "cnt", "mad"}));
  EXPECT_TRUE(sp.phase2.is_control("avg"));
  EXPECT_TRUE(sp.phase2.is_control("cnt"));
  EXPECT_TRUE(sp.phase2.is_data("mad"));
  EXPECT_EQ(sp.phase1.ret.kind, ReturnExpr::Kind::uninterpreted);
  // phase 1 exposes the leaves sum and cnt of the bridge
  std::vector<std::string> leaves;
  for (const auto& a : sp.phase1.ret.args) leaves.push_back(expr_text(*a));
  EXPECT_NE(std::find(leaves.begin(), leaves.end(), "sum"), leaves.end());
  EXPECT_NE(std::find(leaves.begin(), leaves.end(), "cnt"), leaves.end());
}

TEST(Multipass, ControlCrossingIsUnsupported) {
  auto p = parse_program(
      "reducer r { m := cur; next; loop { if (cur > m) { m := cur; } next; }"
      " init; loop { if (cur > m) { y += 1; } next; } ret y; }");
  EXPECT_THROW(check_multipass(p), UnsupportedError);
}
