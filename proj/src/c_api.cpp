#include "cema/cema.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include "cema/analysis.hpp"
#include "cema/engine.hpp"
#include "cema/oracle.hpp"
#include "cema/scenario_io.hpp"

struct cema_scenario {
  cema::Scenario value;
};

struct cema_run {
  cema::Scenario scenario;
  cema::RunResult result;
  cema::RunSummary summary;
};

struct cema_kkt_report {
  cema::KktReport value;
};

struct cema_counterexample {
  cema::CounterexampleReport value;
};

namespace {

thread_local std::string last_error;

cema_status fail(cema_status code, std::string msg) {
  last_error = std::move(msg);
  return code;
}

/// Runs `fn`, translating exceptions into status codes.
template <class Fn> cema_status guarded(Fn &&fn) {
  try {
    fn();
    return CEMA_OK;
  } catch (const cema::InvalidArgument &e) {
    return fail(CEMA_ERR_INVALID_ARGUMENT, e.what());
  } catch (const cema::Infeasible &e) {
    return fail(CEMA_ERR_INFEASIBLE, e.what());
  } catch (const cema::SolverFailure &e) {
    return fail(CEMA_ERR_SOLVER, e.what());
  } catch (const std::bad_alloc &) {
    return fail(CEMA_ERR_INTERNAL, "out of memory");
  } catch (const std::exception &e) {
    return fail(CEMA_ERR_INTERNAL, e.what());
  }
}

char *dup(const std::string &s) {
  char *out = static_cast<char *>(std::malloc(s.size() + 1));
  if (!out)
    throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void *p, const char *what) {
  if (!p)
    throw cema::InvalidArgument(std::string(what) + " must not be NULL");
}

cema::Variant variant_of(cema_variant v) {
  switch (v) {
  case CEMA_VARIANT_ORIGINAL:
    return cema::Variant::original;
  case CEMA_VARIANT_CORRECTED:
    return cema::Variant::corrected;
  }
  throw cema::InvalidArgument("unknown variant");
}

} // namespace

extern "C" {

const char *cema_version(void) { return "1.0.0"; }

const char *cema_last_error(void) { return last_error.c_str(); }

void cema_string_free(char *s) { std::free(s); }

cema_status cema_scenario_load(const char *path_or_preset, cema_scenario **out) {
  return guarded([&] {
    require(path_or_preset, "path");
    require(out, "out");
    *out = new cema_scenario{cema::load_scenario(path_or_preset)};
  });
}

cema_status cema_scenario_parse(const char *json_text, cema_scenario **out) {
  return guarded([&] {
    require(json_text, "json_text");
    require(out, "out");
    *out = new cema_scenario{cema::parse_scenario(json_text)};
  });
}

cema_status cema_scenario_generate(uint64_t seed, size_t generators, size_t consumers,
                                   cema_scenario **out) {
  return guarded([&] {
    require(out, "out");
    *out = new cema_scenario{cema::generate_scenario(seed, generators, consumers)};
  });
}

void cema_scenario_free(cema_scenario *s) { delete s; }

cema_status cema_scenario_to_json(const cema_scenario *s, char **json_out) {
  return guarded([&] {
    require(s, "scenario");
    require(json_out, "json_out");
    *json_out = dup(cema::scenario_to_json(s->value));
  });
}

size_t cema_scenario_node_count(const cema_scenario *s) { return s ? s->value.node_count() : 0; }

size_t cema_scenario_generator_count(const cema_scenario *s) {
  return s ? s->value.generators.size() : 0;
}

cema_status cema_scenario_validate(const cema_scenario *s, size_t *count, char **messages) {
  return guarded([&] {
    require(s, "scenario");
    const auto violations = cema::validate_scenario(s->value);
    if (count)
      *count = violations.size();
    if (messages) {
      std::string text;
      for (const auto &v : violations) {
        if (v.node >= 0)
          text += "node " + std::to_string(v.node) + ": ";
        text += v.message + "\n";
      }
      *messages = dup(text);
    }
  });
}

cema_status cema_scenario_feasibility(const cema_scenario *s, int *holds, double *slack) {
  return guarded([&] {
    require(s, "scenario");
    const auto f = cema::check_feasibility_condition(s->value);
    if (holds)
      *holds = f.holds ? 1 : 0;
    if (slack)
      *slack = f.slack;
  });
}

cema_status cema_scenario_set_eta(cema_scenario *s, double eta) {
  return guarded([&] {
    require(s, "scenario");
    if (!(eta > 0 && eta < 1))
      throw cema::InvalidArgument("eta must lie in (0, 1)");
    s->value.eta = eta;
  });
}

cema_status cema_scenario_set_eps_m(cema_scenario *s, double eps_m) {
  return guarded([&] {
    require(s, "scenario");
    if (!(eps_m > 0))
      throw cema::InvalidArgument("eps_m must be positive");
    s->value.eps_m = eps_m;
  });
}

cema_status cema_scenario_set_eps_l(cema_scenario *s, double eps_l) {
  return guarded([&] {
    require(s, "scenario");
    if (!(eps_l > 0))
      throw cema::InvalidArgument("eps_l must be positive");
    s->value.eps_l = eps_l;
  });
}

cema_status cema_scenario_set_max_iters(cema_scenario *s, size_t max_iters) {
  return guarded([&] {
    require(s, "scenario");
    if (max_iters == 0)
      throw cema::InvalidArgument("max_iters must be positive");
    s->value.max_iters = max_iters;
  });
}

cema_status cema_run_execute(const cema_scenario *s, cema_variant variant, size_t trace_stride,
                             cema_run **out) {
  return guarded([&] {
    require(s, "scenario");
    require(out, "out");
    if (trace_stride == 0)
      throw cema::InvalidArgument("trace stride must be at least 1");
    auto r = std::make_unique<cema_run>(cema_run{s->value, {}, {}});
    r->result = cema::run(r->scenario, variant_of(variant), {trace_stride});
    r->summary = cema::summarize(r->scenario, r->result);
    *out = r.release();
  });
}

void cema_run_free(cema_run *r) { delete r; }

cema_termination cema_run_termination(const cema_run *r) {
  if (!r)
    return CEMA_TERMINATED_DIVERGED;
  switch (r->result.terminated) {
  case cema::Termination::by_tolerance:
    return CEMA_TERMINATED_BY_TOLERANCE;
  case cema::Termination::by_max_iters:
    return CEMA_TERMINATED_BY_MAX_ITERS;
  case cema::Termination::diverged:
    break;
  }
  return CEMA_TERMINATED_DIVERGED;
}

size_t cema_run_rounds(const cema_run *r) { return r ? r->result.rounds : 0; }

double cema_run_max_conservation_error(const cema_run *r) {
  return r ? r->result.max_conservation_error : 0.0;
}

cema_status cema_run_final_state(const cema_run *r, double *lambda, double *P, double *xi,
                                 size_t n) {
  return guarded([&] {
    require(r, "run");
    const auto &states = r->result.final_states;
    if (n != states.size())
      throw cema::InvalidArgument("expected arrays of " + std::to_string(states.size()) +
                                  " entries");
    for (size_t i = 0; i < n; ++i) {
      if (lambda)
        lambda[i] = states[i].lambda;
      if (P)
        P[i] = states[i].P;
      if (xi)
        xi[i] = states[i].xi;
    }
  });
}

cema_status cema_run_write_trace(const cema_run *r, const char *trace_path,
                                 const char *rounds_path) {
  cema_status st = guarded([&] { require(r, "run"); });
  if (st != CEMA_OK)
    return st;
  const auto write = [&](const char *path, auto &&writer) -> cema_status {
    if (!path)
      return CEMA_OK;
    std::ofstream os(path, std::ios::binary);
    if (!os)
      return fail(CEMA_ERR_IO, std::string("cannot open '") + path + "' for writing");
    writer(os);
    os.flush();
    if (!os)
      return fail(CEMA_ERR_IO, std::string("write to '") + path + "' failed");
    return CEMA_OK;
  };
  st = write(trace_path, [&](std::ostream &os) { cema::write_trace_csv(os, r->scenario, r->result); });
  if (st != CEMA_OK)
    return st;
  return write(rounds_path, [&](std::ostream &os) { cema::write_round_summary_csv(os, r->result); });
}

cema_status cema_run_summary(const cema_run *r, char **json_out, char **text_out) {
  return guarded([&] {
    require(r, "run");
    char *json = json_out ? dup(cema::to_json(r->summary)) : nullptr;
    if (text_out) {
      try {
        *text_out = dup(cema::to_text(r->summary));
      } catch (...) {
        std::free(json);
        throw;
      }
    }
    if (json_out)
      *json_out = json;
  });
}

int cema_run_prices_disagree(const cema_run *r) { return r && r->summary.prices_disagree ? 1 : 0; }

cema_status cema_solve(const cema_scenario *s, double tol, double *P_out, size_t n,
                       cema_solution_info *info) {
  return guarded([&] {
    require(s, "scenario");
    const auto sol = cema::solve_centralized(s->value, tol);
    if (P_out) {
      if (n != sol.P.size())
        throw cema::InvalidArgument("expected an array of " + std::to_string(sol.P.size()) +
                                    " entries");
      std::memcpy(P_out, sol.P.data(), n * sizeof(double));
    }
    if (info) {
      info->lambda = sol.lambda;
      info->objective = sol.objective;
      info->balance_residual = sol.balance_residual;
      info->kkt_max_residual = cema::kkt_check(sol.P, sol.lambda, s->value, 1e-6).max_residual;
    }
  });
}

cema_status cema_kkt_check(const cema_scenario *s, const double *P, size_t n, double lambda,
                           double tol, cema_kkt_report **out) {
  return guarded([&] {
    require(s, "scenario");
    require(P, "P");
    require(out, "out");
    *out = new cema_kkt_report{cema::kkt_check({P, n}, lambda, s->value, tol)};
  });
}

void cema_kkt_free(cema_kkt_report *r) { delete r; }

double cema_kkt_max_residual(const cema_kkt_report *r) { return r ? r->value.max_residual : 0.0; }

int cema_kkt_certified(const cema_kkt_report *r) { return r && r->value.certified ? 1 : 0; }

cema_status cema_kkt_to_json(const cema_kkt_report *r, char **json_out) {
  return guarded([&] {
    require(r, "report");
    require(json_out, "json_out");
    *json_out = dup(cema::to_json(r->value));
  });
}

cema_status cema_implied_prices(const cema_scenario *s, const double *gen_P, size_t n_gen,
                                cema_variant variant, double *out) {
  return guarded([&] {
    require(s, "scenario");
    require(gen_P, "gen_P");
    require(out, "out");
    const auto prices = cema::implied_prices({gen_P, n_gen}, s->value, variant_of(variant));
    std::memcpy(out, prices.data(), prices.size() * sizeof(double));
  });
}

cema_status cema_counterexample_analyze(const cema_scenario *s, const double *reference_gen_P,
                                        size_t n_ref, cema_counterexample **out) {
  return guarded([&] {
    require(s, "scenario");
    require(out, "out");
    std::optional<std::vector<double>> ref;
    if (reference_gen_P) {
      if (n_ref != s->value.generators.size())
        throw cema::InvalidArgument("reference dispatch needs one power per generator");
      ref.emplace(reference_gen_P, reference_gen_P + n_ref);
    }
    *out = new cema_counterexample{cema::analyze_counterexample(s->value, std::move(ref))};
  });
}

void cema_counterexample_free(cema_counterexample *c) { delete c; }

cema_counterexample_outcome cema_counterexample_result(const cema_counterexample *c) {
  if (!c)
    return CEMA_CONTRADICTION_NONE;
  switch (c->value.outcome) {
  case cema::CounterexampleOutcome::exhibited:
    return CEMA_CONTRADICTION_EXHIBITED;
  case cema::CounterexampleOutcome::not_converged:
    return CEMA_CONTRADICTION_NOT_CONVERGED;
  case cema::CounterexampleOutcome::no_contradiction:
    break;
  }
  return CEMA_CONTRADICTION_NONE;
}

cema_status cema_counterexample_report(const cema_counterexample *c, char **json_out,
                                       char **text_out) {
  return guarded([&] {
    require(c, "report");
    char *json = json_out ? dup(cema::to_json(c->value)) : nullptr;
    if (text_out) {
      try {
        *text_out = dup(cema::to_text(c->value));
      } catch (...) {
        std::free(json);
        throw;
      }
    }
    if (json_out)
      *json_out = json;
  });
}

size_t cema_table1_reference_dispatch(double *out, size_t n) {
  const auto ref = cema::table1_reference_dispatch();
  for (size_t i = 0; out && i < n && i < ref.size(); ++i)
    out[i] = ref[i];
  return ref.size();
}

} // extern "C"
