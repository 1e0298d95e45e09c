// Command-line driver: diagnose / represent / jensen on instance files, and
// the randomized suites. Exit codes: 0 pass, 1 assertion failure, 2 input error.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ncrep/ncrep.hpp"

using namespace ncrep;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kInput = 2;

Json assertion(const std::string& name, double dev, double tolerance) {
  return {{"name", name}, {"max_deviation", dev}, {"tolerance", tolerance}, {"pass", dev <= tolerance}};
}

bool all_pass(const Json& assertions) {
  for (const auto& a : assertions)
    if (!a.at("pass").get<bool>()) return false;
  return true;
}

Json matrix_json(const ComplexMatrix& m) { return detail::matrix_to_json(m); }

/// Tracial pipeline when the state is a trace on M, the state pipeline otherwise.
RepresentingMeasure represent(const Instance& inst, std::string& pipeline) {
  if (tracial_certificate(inst.state, inst.m).tracial) {
    pipeline = "tracial";
    return representing_expectation_tracial(inst.m, inst.state, inst.d, *inst.a, *inst.phi);
  }
  pipeline = "state";
  return representing_expectation_state(inst.m, inst.state, inst.d, *inst.a, *inst.phi);
}

Json representation_json(const Instance& inst) {
  std::string pipeline;
  const RepresentingMeasure rm = represent(inst, pipeline);
  Json as = Json::array();
  as.push_back(assertion("extension", rm.extension_deviation, tol(1e-7)));
  as.push_back(assertion("preservation", rm.preservation_deviation, tol(1e-8)));
  as.push_back(assertion("restriction", rm.restriction_deviation, tol(1e-8)));
  as.push_back(assertion("kernel_annihilation", rm.kernel_annihilation, tol(1e-8)));
  as.push_back(assertion("normalization", rm.normalization_deviation, tol(1e-7)));
  const ExpectationCheck c = rm.psi.check();
  as.push_back(assertion("psi.unit", c.unit_deviation, tol(1e-9)));
  as.push_back(assertion("psi.idempotence", c.idempotence_deviation, tol(1e-9)));
  as.push_back(assertion("psi.positivity", -c.positivity_margin, tol(1e-8)));
  as.push_back(assertion("psi.bimodule", c.module_deviation, tol(1e-8)));
  return {{"pipeline", pipeline},
          {"rho", matrix_json(rm.rho.density())},
          {"omega", matrix_json(rm.omega.density())},
          {"g_condition", rm.g_condition},
          {"psi", matrix_json(detail::character_to_row_major(rm.psi.matrix(), inst.m.ambient_dim()))},
          {"assertions", as}};
}

int emit(const Json& j, bool pass) {
  std::cout << j.dump(2) << "\n";
  return pass ? kPass : kFail;
}

int cmd_diagnose(const Instance& inst) {
  const DiagnosisReport dr = existence_diagnosis(inst.state, inst.d, inst.m);
  Json j{{"faithful_on_D", dr.faithful_on_D},
         {"tracial_on_D", dr.tracial_on_D},
         {"central", dr.central},
         {"locally_central", dr.locally_central},
         {"support_commutes", dr.support_commutes},
         {"modular_invariant", dr.modular_invariant ? Json(*dr.modular_invariant) : Json(nullptr)},
         {"expectation_exists", dr.expectation_exists},
         {"supported_expectation_exists", dr.supported_expectation_exists},
         {"conditions", {dr.condition1, dr.condition2, dr.condition3}},
         {"consistent", dr.consistent},
         {"centrality_violation", dr.centrality_violation},
         {"reason", dr.reason}};
  const Index n = inst.m.ambient_dim();
  if (dr.expectation) j["expectation"] = matrix_json(detail::character_to_row_major(dr.expectation->matrix(), n));
  if (!dr.faithful_on_D && dr.supported_expectation_exists) {
    const ConditionalExpectation e = support_ideal_expectation(inst.state, inst.d, inst.m);
    j["support"] = matrix_json(e.support());
    j["supported_expectation"] = matrix_json(detail::character_to_row_major(e.matrix(), n));
  }
  bool pass = dr.consistent;
  if (inst.phi) {
    if (dr.faithful_on_D && dr.central && inst.state.is_faithful()) {
      try {
        j["representing_measure"] = representation_json(inst);
        pass = pass && all_pass(j["representing_measure"]["assertions"]);
      } catch (const Error& e) {
        j["representing_measure"] = {{"error", e.what()}};
        pass = false;
      }
    } else {
      j["representing_measure"] = {{"skipped", "state must be faithful with D in its centralizer"}};
    }
  }
  return emit(j, pass);
}

int cmd_represent(const Instance& inst) {
  if (!inst.phi) fail(ErrorCode::ParseError, "represent needs a character");
  Json j = representation_json(inst);
  return emit(j, all_pass(j["assertions"]));
}

int cmd_jensen(const Instance& inst, std::size_t trials, std::uint64_t seed) {
  if (!inst.phi) fail(ErrorCode::ParseError, "jensen needs a character");
  const ConditionalExpectation psi = preserving_expectation(inst.state, inst.d, inst.m);
  const JensenInstance ji{*inst.a, inst.d, *inst.phi, inst.state, psi};
  const JensenSummary s = jensen_measure_suite(ji, trials, seed);
  Json j{{"trials", s.trials},
         {"inequality_passes", s.inequality_passes},
         {"equality_checked", s.equality_checked},
         {"equality_passes", s.equality_passes},
         {"boundary_cases", s.boundary_cases},
         {"boundary_passes", s.boundary_passes},
         {"near_misses", s.near_misses},
         {"max_equality_deviation", s.max_equality_deviation},
         {"max_inequality_excess", s.max_inequality_excess},
         {"pass", s.ok()}};
  return emit(j, s.ok());
}

int cmd_suite(const SuiteOptions& opt, const std::string& report_path) {
  const Report rep = run_suite(opt);
  Json j = suite_report_json(opt, rep);
  const std::string text = j.dump(2) + "\n";
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) fail(ErrorCode::ParseError, "cannot write " + report_path);
    out << text;
    std::size_t k = 0;
    for (const auto& inst : rep.failing_instances()) {
      std::ofstream f(report_path + ".fail" + std::to_string(k++) + ".json");
      f << inst.dump(2) << "\n";
    }
  }
  std::cout << "suite " << opt.suite << ": " << (rep.ok() ? "PASS" : "FAIL") << "\n";
  for (const auto& a : rep.assertions())
    std::cout << "  " << (a.pass() ? "ok  " : "FAIL") << " " << a.name << "  max " << a.max_deviation << "  ("
              << a.checks << " checks, " << a.failures << " failures)\n";
  for (const auto& e : rep.errors()) std::cout << "  error: " << e << "\n";
  return rep.ok() ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* env = std::getenv("NCREP_TOL"); env && !parse_tolerance_scale(env)) {
    std::cerr << "NCREP_TOL must be a finite positive number, got '" << env << "'\n";
    return kInput;
  }

  CLI::App app{"Conditional expectations and representing measures on matrix algebras"};
  app.require_subcommand(1);

  std::string file;
  auto* diagnose = app.add_subcommand("diagnose", "existence table for (omega, D) and, with a character, Psi");
  diagnose->add_option("file", file, "instance file")->required();
  auto* represent_cmd = app.add_subcommand("represent", "representing expectation for the instance's character");
  represent_cmd->add_option("file", file, "instance file")->required();

  std::size_t jensen_trials = 100;
  std::uint64_t jensen_seed = 42;
  auto* jensen = app.add_subcommand("jensen", "Jensen checks on random invertible elements of A");
  jensen->add_option("file", file, "instance file")->required();
  jensen->add_option("--trials", jensen_trials, "random elements")->capture_default_str();
  jensen->add_option("--seed", jensen_seed, "seed")->capture_default_str();

  SuiteOptions opt;
  std::string report_path;
  auto* suite = app.add_subcommand("suite", "randomized verification suite");
  suite->add_option("name", opt.suite, "expectations | hoffman-rossi | jensen | diagnosis | all")
      ->required()
      ->check(CLI::IsMember(suite_names()));
  suite->add_option("--n-max", opt.n_max, "largest dimension (2..16)")->capture_default_str();
  suite->add_option("--trials", opt.trials, "trials")->capture_default_str();
  suite->add_option("--seed", opt.seed, "seed")->capture_default_str();
  suite->add_option("--report", report_path, "write the JSON report here");
  suite->add_flag("--inject-fault", opt.inject_fault, "corrupt constructed maps to test the harness");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kInput;
  }

  try {
    if (*suite) return cmd_suite(opt, report_path);
    Instance inst = [&] {
      try {
        return parse_instance(file);
      } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        std::exit(kInput);
      }
    }();
    if (*diagnose) return cmd_diagnose(inst);
    if (*represent_cmd) return cmd_represent(inst);
    if (*jensen) return cmd_jensen(inst, jensen_trials, jensen_seed);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return e.code() == ErrorCode::ParseError ? kInput : kFail;
  }
  return kInput;
}
