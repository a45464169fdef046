#include <gtest/gtest.h>

#include "support.hpp"

using namespace redcheck;
using support::load;

namespace {

SearchBounds small_bounds() {
  SearchBounds b;
  b.max_init = 20;
  return b;
}

// Lassos of every normalized variant, with their analyses.
template <typename F>
void each_lasso(const Snt& s, F&& f) {
  for (const auto& n : normalize(s))
    for (const auto& ml : classify(n.snt)) {
      if (!n.snt.output[n.snt.transitions[ml.end_transition].dst]) continue;
      f(n, ml, analyze_lasso(n, ml));
    }
}

}  // namespace

TEST(Agreement, ProgramsAgainstOracle) {
  for (const auto& name : support::kPrograms) {
    SCOPED_TRACE(name);
    auto p = load(name);
    Verdict v = check_program(p);
    if (v.answer == Answer::unsupported) continue;
    auto o = oracle_commutative(p);
    if (o.witness) {
      EXPECT_EQ(v.answer, Answer::fails);
    }
    if (v.answer == Answer::holds) {
      EXPECT_FALSE(o.witness);
    }
    if (v.answer == Answer::fails && !v.sound_incomplete) {
      EXPECT_TRUE(o.witness);
    }
  }
}

TEST(Agreement, MachinesAgainstOracle) {
  std::size_t checked = 0;
  for (const auto& m : support::corpus_machines(10, false)) {
    SCOPED_TRACE(m.name);
    if (!validate(m.snt).empty()) continue;
    // products of products are too large to be worth commuting
    if (m.name.find('/') == std::string::npos) {
      Verdict c = check_commutativity(m.snt);
      auto oc = oracle_commutative(restrict_min_length(m.snt), small_bounds());
      if (oc.witness) {
        EXPECT_EQ(c.answer, Answer::fails);
      }
      if (c.answer == Answer::holds) {
        EXPECT_FALSE(oc.witness);
      }
    }
    Verdict z = check_nonzero(m.snt);
    auto oz = oracle_nonzero(m.snt, small_bounds());
    if (oz.witness) {
      EXPECT_EQ(z.answer, Answer::holds);
    }
    if (z.answer == Answer::fails) {
      EXPECT_FALSE(oz.witness);
    }
    ++checked;
  }
  EXPECT_GE(checked, 20u);
}

TEST(Agreement, RandomEquivalences) {
  std::mt19937 rng(77);
  for (int i = 0; i < 40; ++i) {
    Snt s = restrict_min_length(support::random_lasso(rng));
    SCOPED_TRACE(to_text(s));
    for (const Snt& other : {build_swap_snt(s), build_rotate_snt(s)}) {
      Verdict v = check_equivalence(s, other);
      auto o = oracle_equivalent(s, other, small_bounds());
      if (o.witness) {
        EXPECT_EQ(v.answer, Answer::fails);
      }
      if (v.answer == Answer::holds) {
        EXPECT_FALSE(o.witness);
      }
    }
  }
}

TEST(Abstraction, ProductionMatchesLiteralOnCorpus) {
  std::size_t compared = 0;
  for (const auto& m : support::corpus_machines(10, false)) {
    SCOPED_TRACE(m.name);
    if (!validate(m.snt).empty()) continue;
    each_lasso(m.snt, [&](const NormalizedSnt&, const MultiLasso&, const LassoAnalysis& a) {
      std::set<Abs> fam;
      try {
        fam = literal_abstractions(a, 5000);
      } catch (const StructureError&) {
        return;
      }
      std::set<AbsTuple> literal;
      for (const auto& x : fam) literal.insert(x.begin(), x.end());
      auto r = compute_abstraction(a);
      std::set<AbsTuple> production;
      const std::size_t k = m.snt.num_control();
      for (const auto& [core, lab] : r.stages.back().xi) {
        auto t = core_tuples(core);
        production.insert(t.begin(), t.end());
      }
      for (const auto& [v, lab] : r.stages.back().delta) production.insert({k + 1, v});
      EXPECT_EQ(production, literal);
      ++compared;
    });
  }
  EXPECT_GT(compared, 50u);
}

// Every entry of a cycle closure lies in the junction's bounded domain.
TEST(Abstraction, BoundedDomainHoldsOnCorpus) {
  std::size_t checks = 0;
  for (const auto& m : support::corpus_machines(10, true)) {
    if (!validate(m.snt).empty()) continue;
    each_lasso(m.snt, [&](const NormalizedSnt&, const MultiLasso&, const LassoAnalysis& a) {
      Step3Result r;
      EXPECT_NO_THROW(r = compute_abstraction(a)) << m.name;
      checks += r.u_checks;
    });
  }
  EXPECT_GT(checks, 1000u);
}

TEST(Structure, NormalizeAndProductPreserveConstraints) {
  for (const auto& m : support::corpus_machines(10, true)) {
    SCOPED_TRACE(m.name);
    auto v = validate(m.snt);
    ASSERT_TRUE(v.empty()) << v.front().constraint << ": " << v.front().message;
    for (const auto& n : normalize(m.snt)) {
      auto w = validate(n.snt);
      EXPECT_TRUE(w.empty()) << w.front().constraint << ": " << w.front().message;
    }
  }
}

TEST(Summary, SoundOnRandomLassos) {
  std::mt19937 rng(31);
  support::SoundStats st;
  for (int i = 0; i < 10; ++i) {
    Snt s = support::random_lasso(rng);
    for (const auto& n : normalize(s)) {
      for (std::size_t len = 0; len <= 3; ++len) {
        std::vector<std::size_t> cur;
        support::paths_from(n.snt, n.snt.initial, len, cur, [&](const std::vector<std::size_t>& p) {
          support::check_sound(n.snt, p, n.initial, rng, 50, st);
        });
      }
      for (int t = 0; t < 10; ++t)
        support::check_sound(n.snt, support::random_path(n.snt, n.snt.initial, 8, rng), n.initial, rng, 50, st);
    }
  }
  EXPECT_TRUE(st.failures.empty()) << st.failures.front();
  EXPECT_GT(st.samples, 5000u);
}

TEST(Summary, PowerMatchesCompositionOnRandomCycles) {
  std::mt19937 rng(41);
  std::size_t cycles = 0;
  for (int i = 0; i < 10; ++i) {
    Snt s = support::random_lasso(rng);
    each_lasso(s, [&](const NormalizedSnt&, const MultiLasso&, const LassoAnalysis& a) {
      for (const auto& st : a.stages)
        for (const auto& c : st.cycles) {
          PathSummary p;
          try {
            p = cycle_power(c);
          } catch (const StructureError&) {
            continue;
          }
          PathSummary acc = c;
          for (std::size_t l = 2; l <= 4; ++l) {
            acc = compose(acc, c);
            EXPECT_EQ(canonical(instantiate(p, l)), canonical(acc));
          }
          EXPECT_EQ(canonical(compose(PathSummary::identity(c.start, c.num_data()), c)), canonical(c));
          EXPECT_EQ(canonical(compose(c, PathSummary::identity(c.start, c.num_data()))), canonical(c));
          ++cycles;
        }
    });
  }
  EXPECT_GT(cycles, 10u);
}

TEST(Report, JsonRoundTrip) {
  Report r;
  r.command = "check";
  r.inputs = {"first.red"};
  r.verdict = check_program(load("first"), {true, 1});
  r.verdict.evidence.witness = oracle_commutative(load("first")).witness;
  r.oracle = OracleCheck{r.verdict.evidence.witness, false, 42, true};
  r.timings = {{"decide", 1.25}, {"oracle", 0.1}};
  Report back = parse_report(report_json(r));
  EXPECT_EQ(back, r);
  Verdict mad = check_program(load("mad"));
  Report m;
  m.command = "check";
  m.verdict = mad;
  EXPECT_EQ(parse_report(report_json(m)), m);
  EXPECT_NE(report_json(m).find("sound_incomplete"), std::string::npos);
}
