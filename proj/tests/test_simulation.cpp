#include <doctest.h>

#include <cmath>
#include <random>

#include "spreader/errors.hpp"
#include "spreader/simulation.hpp"
#include "support.hpp"

using namespace spreader;
using spreader::testing::random_schedule;
using spreader::testing::ScriptedController;

namespace {

// Short straight run across the middle of the default field.
Scenario short_run(int seconds = 4) {
  Scenario s = three_tramline_scenario();
  s.plan.start = {40.0, 75.0, 0.0};
  s.plan.segments = {{10.0, 0.0, static_cast<double>(seconds)}};
  return s;
}

OptimizerSettings quick() {
  OptimizerSettings o;
  o.max_iterations = 15;
  return o;
}

}  // namespace

TEST_SUITE("simulation") {

TEST_CASE("an empty plan gives an empty trace and the baseline cost") {
  Scenario s = three_tramline_scenario();
  s.plan.segments.clear();
  const auto cal = CalibrationModel::defaults();
  const RunRecord rec = run(s, cal, {}, quick());
  CHECK(rec.steps.empty());
  CHECK_FALSE(rec.aborted);
  CHECK(rec.final_cost == doctest::Approx(90.0 * 90.0 * 400.0).epsilon(1e-15));
  CHECK(rec.final_applied.sum() == 0.0);
}

TEST_CASE("a scripted controller reproduces one-pass accumulation") {
  const Scenario s = three_tramline_scenario();
  const auto cal = CalibrationModel::defaults();
  const ControlConstraints limits;
  const auto states = trajectory(s.plan, s.dt);
  const std::size_t n = states.size() - 1;
  std::mt19937_64 rng(31);
  const ControlSchedule script = random_schedule(limits, s.initial_controls, n, rng);

  ScriptedController stub(script.steps);
  const RunRecord rec = run_with(s, cal, limits, stub);
  REQUIRE(rec.steps.size() == n);

  CellMatrix expected = CellMatrix::Zero(90, 90);
  for (std::size_t k = 1; k <= n; ++k) {
    const SpreaderControls& u = script.steps[k - 1];
    expected += total_deposit(states[k], pattern_from_controls(u.rpm_left, u.d_left, cal, Side::Left),
                              pattern_from_controls(u.rpm_right, u.d_right, cal, Side::Right),
                              s.grid, s.plant_options())
                    .values();
  }
  const double scale = expected.cwiseAbs().maxCoeff();
  CHECK((rec.final_applied.values() - expected).cwiseAbs().maxCoeff() <= 1e-12 * scale);
  CHECK(rec.final_cost == doctest::Approx(cost(AmountMap(expected), s.prescription)).epsilon(1e-12));
}

TEST_CASE("trace bookkeeping") {
  const Scenario s = short_run(5);
  const auto cal = CalibrationModel::defaults();
  const RunRecord rec = run(s, cal, {}, quick());
  REQUIRE(rec.steps.size() == 5);
  double before = cost(AmountMap(90), s.prescription);
  for (std::size_t i = 0; i < rec.steps.size(); ++i) {
    const StepRecord& st = rec.steps[i];
    CHECK(st.k == static_cast<int>(i) + 1);
    CHECK(st.t == doctest::Approx(st.k * s.dt));
    CHECK(st.plant_model == DepositionModel::FullNormal);
    CHECK(st.controller_seconds >= 0.0);
    CHECK(st.deposit_mass >= 0.0);
    CHECK(std::isfinite(st.cost));
    before = st.cost;
  }
  CHECK(rec.steps.back().cost == doctest::Approx(rec.final_cost).epsilon(1e-9));
  CHECK(before == rec.final_cost);
  double mass = 0;
  for (const auto& st : rec.steps) mass += st.deposit_mass;
  CHECK(mass == doctest::Approx(rec.final_applied.sum()).epsilon(1e-9));
  CHECK(rec.controller == "mpc-full");
}

TEST_CASE("the plant always deposits with the full model") {
  Scenario s = short_run(3);
  s.controller = ControllerKind::MpcTriangle;
  const auto cal = CalibrationModel::defaults();
  const RunRecord rec = run(s, cal, {}, quick());
  REQUIRE(rec.steps.size() == 3);
  for (const auto& st : rec.steps) CHECK(st.plant_model == DepositionModel::FullNormal);
  CHECK(rec.controller == "mpc-triangle");
}

TEST_CASE("runs are reproducible") {
  const Scenario s = short_run(4);
  const auto cal = CalibrationModel::defaults();
  const RunRecord a = run(s, cal, {}, quick());
  const RunRecord b = run(s, cal, {}, quick());
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) CHECK(a.steps[i].controls == b.steps[i].controls);
  CHECK(a.final_applied == b.final_applied);
  CHECK(a.final_cost == b.final_cost);
}

TEST_CASE("every applied control is feasible") {
  Scenario s = short_run(6);
  s.controller = ControllerKind::Greedy;
  const auto cal = CalibrationModel::defaults();
  const ControlConstraints limits;
  const RunRecord rec = run(s, cal, limits, quick());
  REQUIRE_FALSE(rec.aborted);
  SpreaderControls prev = s.initial_controls;
  for (const auto& st : rec.steps) {
    CHECK(is_feasible(st.controls, prev, limits));
    prev = st.controls;
  }
}

TEST_CASE("conservative scaling accounts for the mass released") {
  Scenario s = short_run(5);
  s.scaling = DepositScaling::Conservative;
  const auto cal = CalibrationModel::defaults();
  const ControlConstraints limits;
  std::mt19937_64 rng(5);
  const ControlSchedule script = random_schedule(limits, s.initial_controls, 5, rng);
  ScriptedController stub(script.steps);
  const RunRecord rec = run_with(s, cal, limits, stub);
  REQUIRE(rec.steps.size() == 5);
  for (const auto& st : rec.steps) {
    const double released = st.controls.d_left + st.controls.d_right;
    if (released < 1.0) continue;
    CHECK(st.deposit_mass == doctest::Approx(released).epsilon(0.05));
  }
}

TEST_CASE("a controller failure ends the run with a diagnostic") {
  const Scenario s = short_run(4);
  ScriptedController stub({{45, 45, 600, 600}, {90, 90, 600, 600}});
  const RunRecord rec = run_with(s, CalibrationModel::defaults(), {}, stub);
  CHECK(rec.aborted);
  CHECK(rec.steps.size() == 1);
  CHECK(rec.diagnostic.find("step 2") != std::string::npos);
}

TEST_CASE("scenario validation") {
  const ControlConstraints limits;
  Scenario s = short_run();
  CHECK_NOTHROW(s.validate(limits));
  s.dt = 0;
  CHECK_THROWS_AS(s.validate(limits), ConfigError);
  s = short_run();
  s.horizon = 0;
  CHECK_THROWS_AS(s.validate(limits), ConfigError);
  s = short_run();
  s.dt = 3;  // 4 s segment
  CHECK_THROWS_AS(s.validate(limits), ConfigError);
  s = short_run();
  s.initial_controls.rpm_left = 1000;
  CHECK_THROWS_AS(s.validate(limits), ConfigError);
  s = short_run();
  s.prescription = PrescriptionMap(10, 20.0);
  CHECK_THROWS_AS(s.validate(limits), ShapeError);
  CHECK(parse_controller("greedy") == ControllerKind::Greedy);
  CHECK(to_string(ControllerKind::MpcTriangle) == "mpc-triangle");
  CHECK_THROWS_AS(parse_controller("pid"), ConfigError);
}

TEST_CASE("comparison") {
  const auto cal = CalibrationModel::defaults();
  Scenario a = short_run(3);
  a.controller = ControllerKind::Greedy;

  SUBCASE("variants must share a base") {
    Scenario b = a;
    b.dt = 0.5;
    CHECK_THROWS_AS(compare({a, b}, cal, {}, quick()), ConfigError);
    CHECK_THROWS_AS(compare({}, cal, {}, quick()), ConfigError);
  }
  SUBCASE("identical controllers give identical costs") {
    const ComparisonSummary r = compare({a, a}, cal, {}, quick());
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[0].final_cost == r.rows[1].final_cost);
    CHECK(r.runs[0].final_applied == r.runs[1].final_applied);
  }
  SUBCASE("a failing variant is recorded and the rest still run") {
    Scenario bad = a;
    bad.controller = ControllerKind::MpcFull;
    bad.horizon = 0;
    const ComparisonSummary r = compare({bad, a}, cal, {}, quick());
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[0].failed);
    CHECK_FALSE(r.rows[0].error.empty());
    CHECK_FALSE(r.rows[1].failed);
    CHECK(r.ranking == std::vector<ControllerKind>{ControllerKind::Greedy});
  }
  SUBCASE("ranking is ascending in cost") {
    Scenario b = a;
    b.controller = ControllerKind::MpcFull;
    b.horizon = 2;
    const ComparisonSummary r = compare({a, b}, cal, {}, quick());
    REQUIRE(r.ranking.size() == 2);
    const auto cost_of = [&](ControllerKind k) {
      for (const auto& row : r.rows) if (row.controller == k) return row.final_cost;
      return 0.0;
    };
    CHECK(cost_of(r.ranking[0]) <= cost_of(r.ranking[1]));
  }
}

}
