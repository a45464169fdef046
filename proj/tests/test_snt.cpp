#include <gtest/gtest.h>

#include "support.hpp"

using namespace redcheck;
using support::slurp;

namespace {

const char* kMax =
    "snt max {\n"
    "  control max;\n"
    "  init q0;\n"
    "  q0 -> q1 [true] { max := cur; }\n"
    "  q1 -> q1 [cur > max] { max := cur; }\n"
    "  q1 -> q1 [cur = max] {}\n"
    "  q1 -> q1 [cur < max] {}\n"
    "  q1 -> q2 [end] {}\n"
    "  output q2 = max;\n"
    "}\n";

bool has_violation(const Snt& s, const std::string& constraint) {
  for (const auto& v : validate(s))
    if (v.constraint == constraint) return true;
  return false;
}

// Brute force over {0..n-1}^n.
bool brute_sat(std::size_t n, const std::vector<SymAtom>& atoms) {
  std::vector<std::size_t> v(n, 0);
  for (;;) {
    bool ok = true;
    for (const auto& a : atoms) ok = ok && rel_holds(a.rel, static_cast<Value>(v[a.lhs]), static_cast<Value>(v[a.rhs]));
    if (ok) return true;
    std::size_t i = 0;
    while (i < n && ++v[i] == n) v[i++] = 0;
    if (i == n) return false;
  }
}

}  // namespace

TEST(Run, MaxExamples) {
  Snt s = parse_snt(kMax);
  EXPECT_EQ(run(s, {3, 1, 5}), 5);
  EXPECT_EQ(run(s, {7}), 7);
  EXPECT_EQ(run(s, {}), std::nullopt);
}

TEST(Run, GoldenTranslationMatchesHandWritten) {
  Snt golden = parse_snt(slurp("max.snt"));
  EXPECT_EQ(to_text(golden), to_text(parse_snt(kMax)));
  EXPECT_EQ(to_text(program_to_snt(support::load("max"))), slurp("max.snt"));
}

TEST(Run, SmaxHandThenCycleTwo) {
  // H then C2 at l = 1: y = (d1+x1+3d2, d1+3x1+2d2, d1+5x1+d2) with x1 = d1
  Snt s = support::smax();
  for (Value d1 : {-2, 0, 3})
    for (Value d2 : {d1 + 1, d1 + 4}) {
      Value y1 = d1 + d1 + 3 * d2, y2 = d1 + 3 * d1 + 2 * d2, y3 = d1 + 5 * d1 + d2;
      EXPECT_EQ(run(s, {d1, d2}), y1 - 2 * y2 + y3);
    }
}

TEST(Run, TraceRecordsTransitions) {
  Snt s = parse_snt(kMax);
  auto tr = run_trace(s, {2, 5, 5}, SntValuation{{0}, {}});
  EXPECT_FALSE(tr.stuck);
  EXPECT_EQ(tr.transitions.size(), 4u);
  EXPECT_EQ(tr.output, 5);
}

TEST(Run, ParseRoundTrip) {
  for (const char* f : {"smax_prime.snt", "max.snt"}) {
    Snt s = parse_snt(slurp(f));
    EXPECT_EQ(to_text(parse_snt(to_text(s))), to_text(s));
  }
}

TEST(Parse, RejectsMalformedInput) {
  EXPECT_THROW(parse_snt("snt t { init q0; q0 -> q1 [cur > y] {} }"), ParseError);
  EXPECT_THROW(parse_snt("snt t { control x; init q0; q0 -> q1 [cur > x | cur < x] {} }"), ParseError);
  EXPECT_THROW(parse_snt("snt t { control x; init q0; q0 -> q1 [true] { x := cur "), ParseError);
}

TEST(GuardSat, Examples) {
  EXPECT_FALSE(guard_sat(3, {{0, Rel::lt, 1}, {1, Rel::lt, 2}, {2, Rel::lt, 0}}));
  EXPECT_TRUE(guard_sat(3, {{0, Rel::eq, 1}, {1, Rel::lt, 2}}));
  EXPECT_FALSE(guard_sat(2, {{0, Rel::lt, 1}, {0, Rel::eq, 1}}));
}

TEST(GuardSat, AgreesWithBruteForce) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    std::uniform_int_distribution<std::size_t> sym(0, n - 1);
    std::uniform_int_distribution<int> rel(0, 2), count(0, 5);
    std::vector<SymAtom> atoms;
    for (int i = count(rng); i > 0; --i) atoms.push_back({sym(rng), static_cast<Rel>(rel(rng)), sym(rng)});
    EXPECT_EQ(guard_sat(n, atoms), brute_sat(n, atoms));
  }
}

TEST(Validate, MaxIsClean) { EXPECT_TRUE(validate(parse_snt(kMax)).empty()); }

TEST(Validate, MaxAndMinTrackingIsNotMonotone) {
  Snt s = parse_snt(
      "snt t { control x; init q0;\n"
      "q0 -> q1 [true] { x := cur; }\n"
      "q1 -> q1 [cur > x] { x := cur; }\n"
      "q1 -> q1 [cur < x] { x := cur; }\n"
      "q1 -> q2 [end] {}\n"
      "output q2 = x; }");
  EXPECT_TRUE(has_violation(s, "monotone"));
}

TEST(Validate, DoublingIsNotCopyless) {
  Snt s = parse_snt(
      "snt t { data y; init q0;\n"
      "q0 -> q0 [true] { y := 2*y; }\n"
      "q0 -> q1 [end] {}\n"
      "output q1 = y; }");
  EXPECT_TRUE(has_violation(s, "copyless"));
}

TEST(Validate, OverlappingGuardsAreNondeterministic) {
  Snt s = parse_snt(
      "snt t { control x; init q0;\n"
      "q0 -> q1 [cur > x] {}\n"
      "q0 -> q2 [true] {}\n"
      "}");
  EXPECT_TRUE(has_violation(s, "deterministic"));
}

TEST(Validate, LongCycleIsNotFlat) {
  Snt s = parse_snt(
      "snt t { init q0;\n"
      "q0 -> q1 [true] {}\n"
      "q1 -> q0 [true] {}\n"
      "q0 -> q2 [end] {}\n"
      "output q2 = 0; }");
  EXPECT_TRUE(has_violation(s, "generalized-flat"));
}

TEST(Validate, EndTransitionMustReachASink) {
  Snt s = parse_snt(
      "snt t { init q0;\n"
      "q0 -> q1 [end] {}\n"
      "q1 -> q1 [true] {}\n"
      "}");
  EXPECT_TRUE(has_violation(s, "sink"));
}

TEST(Validate, EndTransitionCannotReadCur) {
  Snt s = parse_snt(
      "snt t { data y; init q0;\n"
      "q0 -> q1 [end] { y := cur; }\n"
      "output q1 = y; }");
  EXPECT_TRUE(has_violation(s, "end-transition"));
}

TEST(Classify, MaxIsOneLasso) {
  auto ls = classify(parse_snt(kMax));
  ASSERT_EQ(ls.size(), 1u);
  ASSERT_EQ(ls[0].stages.size(), 1u);
  EXPECT_EQ(ls[0].stages[0].handle.size(), 1u);
  EXPECT_EQ(ls[0].stages[0].bundle.size(), 3u);
}

TEST(Classify, DagHasEmptyBundles) {
  Snt s = parse_snt(
      "snt t { control x; init q0;\n"
      "q0 -> q1 [cur > x] {}\n"
      "q0 -> q1 [cur < x] {}\n"
      "q1 -> q2 [end] {}\n"
      "output q2 = x; }");
  auto ls = classify(s);
  EXPECT_EQ(ls.size(), 2u);
  for (const auto& l : ls)
    for (const auto& st : l.stages) EXPECT_TRUE(st.bundle.empty());
}

TEST(Classify, ChainedMaxHasTwoJunctions) {
  Snt s = parse_snt(
      "snt t { control x; init q0;\n"
      "q0 -> q1 [true] { x := cur; }\n"
      "q1 -> q1 [cur > x] { x := cur; }\n"
      "q1 -> q1 [cur < x] {}\n"
      "q1 -> q2 [cur = x] {}\n"
      "q2 -> q2 [cur > x] { x := cur; }\n"
      "q2 -> q2 [cur < x] {}\n"
      "q2 -> q3 [end] {}\n"
      "output q3 = x; }");
  ASSERT_TRUE(validate(s).empty());
  auto ls = classify(s);
  ASSERT_EQ(ls.size(), 1u);
  ASSERT_EQ(ls[0].stages.size(), 2u);
  EXPECT_EQ(ls[0].stages[0].bundle.size(), 2u);
  EXPECT_EQ(ls[0].stages[1].bundle.size(), 2u);
}

// Every run's transition sequence is H1 s1 H2 ... of one classified multi-lasso.
TEST(Classify, RunsEmbedIntoMultiLassos) {
  std::mt19937 rng(9);
  std::size_t checked = 0;
  for (const auto& m : support::corpus_machines(10, false)) {
    SCOPED_TRACE(m.name);
    auto ls = classify(m.snt);
    std::uniform_int_distribution<Value> d(-3, 3);
    std::uniform_int_distribution<int> len(0, 5);
    for (int trial = 0; trial < 40; ++trial) {
      std::vector<Value> w(static_cast<std::size_t>(len(rng)));
      for (auto& x : w) x = d(rng);
      SntValuation v{std::vector<Value>(m.snt.num_control()), std::vector<Value>(m.snt.num_data())};
      for (auto& x : v.control) x = d(rng);
      apply_links(m.snt, v);
      auto tr = run_trace(m.snt, w, v);
      if (tr.stuck || tr.transitions.empty() || !m.snt.transitions[tr.transitions.back()].end) continue;
      bool embedded = false;
      for (const auto& l : ls) {
        if (l.end_transition != tr.transitions.back()) continue;
        std::size_t i = 0;
        bool ok = true;
        for (const auto& st : l.stages) {
          for (std::size_t t : st.handle) ok = ok && i < tr.transitions.size() && tr.transitions[i++] == t;
          while (ok && i + 1 < tr.transitions.size() &&
                 std::find(st.bundle.begin(), st.bundle.end(), tr.transitions[i]) != st.bundle.end())
            ++i;
        }
        if (ok && i + 1 == tr.transitions.size()) embedded = true;
      }
      EXPECT_TRUE(embedded);
      ++checked;
    }
  }
  EXPECT_GT(checked, 200u);
}
