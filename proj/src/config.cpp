#include "cogd/config.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>

#include "cogd/errors.hpp"
#include "cogd/run_record.hpp"

namespace cogd {

namespace {

using Getter = std::function<std::string(const ExperimentConfig&)>;
using Setter =
    std::function<std::string(ExperimentConfig&, const std::string&)>;

struct Entry {
  std::string key;
  Getter get;
  Setter set;
};

std::string parse_double_checked(const std::string& text, double& out) {
  if (text.empty()) return "empty value";
  char* end = nullptr;
  out = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) return "not a number: '" + text + "'";
  return "";
}

std::string parse_int_checked(const std::string& text, long long& out) {
  if (text.empty()) return "empty value";
  char* end = nullptr;
  out = std::strtoll(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size())
    return "not an integer: '" + text + "'";
  return "";
}

// Field factories; each setter validates the domain and reports the key in
// its message so the harness can surface every violation with context.

Entry make_double(const std::string& key,
                  std::function<double&(ExperimentConfig&)> ref, double lo,
                  double hi, bool lo_strict, const std::string& domain) {
  return Entry{
      key,
      [ref](const ExperimentConfig& c) {
        return format_double(ref(const_cast<ExperimentConfig&>(c)));
      },
      [key, ref, lo, hi, lo_strict, domain](ExperimentConfig& c,
                                            const std::string& v) {
        double d = 0;
        if (auto err = parse_double_checked(v, d); !err.empty())
          return key + ": " + err;
        if (!std::isfinite(d)) return key + ": must be finite";
        if (d < lo || d > hi || (lo_strict && d == lo))
          return key + ": must be " + domain;
        ref(c) = d;
        return std::string();
      }};
}

Entry make_int(const std::string& key,
               std::function<int&(ExperimentConfig&)> ref, long long lo,
               long long hi, const std::string& domain) {
  return Entry{
      key,
      [ref](const ExperimentConfig& c) {
        return std::to_string(ref(const_cast<ExperimentConfig&>(c)));
      },
      [key, ref, lo, hi, domain](ExperimentConfig& c, const std::string& v) {
        long long i = 0;
        if (auto err = parse_int_checked(v, i); !err.empty())
          return key + ": " + err;
        if (i < lo || i > hi) return key + ": must be " + domain;
        ref(c) = static_cast<int>(i);
        return std::string();
      }};
}

Entry make_bool(const std::string& key,
                std::function<bool&(ExperimentConfig&)> ref) {
  return Entry{
      key,
      [ref](const ExperimentConfig& c) {
        return ref(const_cast<ExperimentConfig&>(c)) ? std::string("true")
                                                     : std::string("false");
      },
      [key, ref](ExperimentConfig& c, const std::string& v) {
        if (v == "true" || v == "1") {
          ref(c) = true;
        } else if (v == "false" || v == "0") {
          ref(c) = false;
        } else {
          return key + ": expected true/false, got '" + v + "'";
        }
        return std::string();
      }};
}

Entry make_enum(const std::string& key,
                std::function<std::string&(ExperimentConfig&)> ref,
                std::vector<std::string> allowed) {
  return Entry{
      key,
      [ref](const ExperimentConfig& c) {
        return ref(const_cast<ExperimentConfig&>(c));
      },
      [key, ref, allowed](ExperimentConfig& c, const std::string& v) {
        for (const auto& a : allowed) {
          if (v == a) {
            ref(c) = v;
            return std::string();
          }
        }
        std::string msg = key + ": '" + v + "' is not one of {";
        for (std::size_t i = 0; i < allowed.size(); ++i)
          msg += (i ? ", " : "") + allowed[i];
        return msg + "}";
      }};
}

Entry make_string(const std::string& key,
                  std::function<std::string&(ExperimentConfig&)> ref) {
  return Entry{key,
               [ref](const ExperimentConfig& c) {
                 return ref(const_cast<ExperimentConfig&>(c));
               },
               [ref](ExperimentConfig& c, const std::string& v) {
                 ref(c) = v;
                 return std::string();
               }};
}

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> r;
    auto D = [](auto member) {
      return std::function<double&(ExperimentConfig&)>(member);
    };
    auto I = [](auto member) {
      return std::function<int&(ExperimentConfig&)>(member);
    };
    auto B = [](auto member) {
      return std::function<bool&(ExperimentConfig&)>(member);
    };
    auto S = [](auto member) {
      return std::function<std::string&(ExperimentConfig&)>(member);
    };

    r.push_back(make_enum("experiment",
                          S([](ExperimentConfig& c) -> std::string& {
                            return c.experiment;
                          }),
                          experiment_names()));
    r.push_back(Entry{
        "seed",
        [](const ExperimentConfig& c) { return std::to_string(c.seed); },
        [](ExperimentConfig& c, const std::string& v) -> std::string {
          if (v.empty()) return "seed: empty value";
          char* end = nullptr;
          const unsigned long long parsed = std::strtoull(v.c_str(), &end, 10);
          if (end != v.c_str() + v.size() || v[0] == '-')
            return "seed: not an unsigned integer: '" + v + "'";
          c.seed = parsed;
          return "";
        }});
    r.push_back(make_string("output_dir",
                            S([](ExperimentConfig& c) -> std::string& {
                              return c.output_dir;
                            })));
    r.push_back(make_enum("variant",
                          S([](ExperimentConfig& c) -> std::string& {
                            return c.variant;
                          }),
                          {"plain", "cogd"}));

    r.push_back(make_int("kernel_exponent",
                         I([](ExperimentConfig& c) -> int& {
                           return c.coupling.kernel_exponent;
                         }),
                         1, 16, ">= 1 (and <= 16)"));
    r.push_back(make_double("beta_scale",
                            D([](ExperimentConfig& c) -> double& {
                              return c.coupling.beta_scale;
                            }),
                            0, kInf, false, ">= 0"));
    r.push_back(make_double("alpha_sparse",
                            D([](ExperimentConfig& c) -> double& {
                              return c.coupling.alpha_sparse;
                            }),
                            0, kInf, false, ">= 0"));
    r.push_back(make_double("alpha_dense",
                            D([](ExperimentConfig& c) -> double& {
                              return c.coupling.alpha_dense;
                            }),
                            0, kInf, false, ">= 0"));
    r.push_back(make_int("period",
                         I([](ExperimentConfig& c) -> int& {
                           return c.coupling.period;
                         }),
                         1, 1000000, ">= 1"));
    r.push_back(make_double("zero_guard",
                            D([](ExperimentConfig& c) -> double& {
                              return c.coupling.zero_guard;
                            }),
                            0, kInf, true, "> 0"));
    r.push_back(Entry{
        "gate_norm",
        [](const ExperimentConfig& c) {
          return c.coupling.norm == NormKind::L1 ? std::string("l1")
                                                 : std::string("l2");
        },
        [](ExperimentConfig& c, const std::string& v) -> std::string {
          if (v == "l1") {
            c.coupling.norm = NormKind::L1;
          } else if (v == "l2") {
            c.coupling.norm = NormKind::L2;
          } else {
            return "gate_norm: '" + v + "' is not one of {l1, l2}";
          }
          return "";
        }});

    r.push_back(Entry{
        "optimizer",
        [](const ExperimentConfig& c) { return to_string(c.optimizer.kind); },
        [](ExperimentConfig& c, const std::string& v) -> std::string {
          try {
            c.optimizer.kind = optimizer_kind_from_string(v);
          } catch (const InvalidInput& e) {
            return e.what();
          }
          return "";
        }});
    r.push_back(make_double("learning_rate",
                            D([](ExperimentConfig& c) -> double& {
                              return c.optimizer.learning_rate;
                            }),
                            0, kInf, true, "> 0"));
    r.push_back(make_double("learning_rate_dense",
                            D([](ExperimentConfig& c) -> double& {
                              return c.learning_rate_dense;
                            }),
                            0, kInf, true, "> 0"));
    r.push_back(make_double("momentum",
                            D([](ExperimentConfig& c) -> double& {
                              return c.optimizer.momentum;
                            }),
                            0, 1 - 1e-12, false, "in [0, 1)"));
    r.push_back(make_double("adam_beta1",
                            D([](ExperimentConfig& c) -> double& {
                              return c.optimizer.adam_beta1;
                            }),
                            0, 1 - 1e-12, false, "in [0, 1)"));
    r.push_back(make_double("adam_beta2",
                            D([](ExperimentConfig& c) -> double& {
                              return c.optimizer.adam_beta2;
                            }),
                            0, 1 - 1e-12, false, "in [0, 1)"));
    r.push_back(make_double("adam_epsilon",
                            D([](ExperimentConfig& c) -> double& {
                              return c.optimizer.adam_epsilon;
                            }),
                            0, kInf, true, "> 0"));

    r.push_back(make_double("beale_start_x1",
                            D([](ExperimentConfig& c) -> double& {
                              return c.beale_start_x1;
                            }),
                            -kInf, kInf, false, "finite"));
    r.push_back(make_double("beale_start_x2",
                            D([](ExperimentConfig& c) -> double& {
                              return c.beale_start_x2;
                            }),
                            -kInf, kInf, false, "finite"));
    r.push_back(make_double("beale_c1",
                            D([](ExperimentConfig& c) -> double& {
                              return c.beale_c1;
                            }),
                            -kInf, kInf, false, "finite"));
    r.push_back(make_double("beale_c2",
                            D([](ExperimentConfig& c) -> double& {
                              return c.beale_c2;
                            }),
                            -kInf, kInf, false, "finite"));
    r.push_back(make_double("beale_c3",
                            D([](ExperimentConfig& c) -> double& {
                              return c.beale_c3;
                            }),
                            -kInf, kInf, false, "finite"));
    r.push_back(make_double("lr_sgd",
                            D([](ExperimentConfig& c) -> double& {
                              return c.lr_sgd;
                            }),
                            0, kInf, true, "> 0"));
    r.push_back(make_double("lr_momentum",
                            D([](ExperimentConfig& c) -> double& {
                              return c.lr_momentum;
                            }),
                            0, kInf, true, "> 0"));
    r.push_back(make_double("lr_adam",
                            D([](ExperimentConfig& c) -> double& {
                              return c.lr_adam;
                            }),
                            0, kInf, true, "> 0"));
    r.push_back(make_int("iterations",
                         I([](ExperimentConfig& c) -> int& {
                           return c.iterations;
                         }),
                         1, 100000000, ">= 1"));

    r.push_back(make_int("lsq_rows",
                         I([](ExperimentConfig& c) -> int& {
                           return c.lsq_rows;
                         }),
                         1, 100000, ">= 1"));
    r.push_back(make_int("lsq_cols",
                         I([](ExperimentConfig& c) -> int& {
                           return c.lsq_cols;
                         }),
                         1, 100000, ">= 1"));
    r.push_back(make_int("lsq_true_nonzeros",
                         I([](ExperimentConfig& c) -> int& {
                           return c.lsq_true_nonzeros;
                         }),
                         0, 100000, ">= 0"));
    r.push_back(make_double("lsq_lambda",
                            D([](ExperimentConfig& c) -> double& {
                              return c.lsq_lambda;
                            }),
                            0, kInf, false, ">= 0"));
    r.push_back(make_double("lsq_dense_reg",
                            D([](ExperimentConfig& c) -> double& {
                              return c.lsq_dense_reg;
                            }),
                            0, kInf, false, ">= 0"));
    r.push_back(make_double("lsq_noise",
                            D([](ExperimentConfig& c) -> double& {
                              return c.lsq_noise;
                            }),
                            0, kInf, false, ">= 0"));

    r.push_back(make_string("image_path",
                            S([](ExperimentConfig& c) -> std::string& {
                              return c.image_path;
                            })));
    r.push_back(make_int("csc_filters",
                         I([](ExperimentConfig& c) -> int& {
                           return c.csc_filters;
                         }),
                         1, 4096, ">= 1"));
    r.push_back(make_int("csc_filter_size",
                         I([](ExperimentConfig& c) -> int& {
                           return c.csc_filter_size;
                         }),
                         1, 256, ">= 1"));
    r.push_back(make_int("csc_image_size",
                         I([](ExperimentConfig& c) -> int& {
                           return c.csc_image_size;
                         }),
                         4, 4096, ">= 4"));
    r.push_back(make_double("csc_lambda",
                            D([](ExperimentConfig& c) -> double& {
                              return c.csc_lambda;
                            }),
                            0, kInf, false, ">= 0"));
    r.push_back(make_double("csc_rho",
                            D([](ExperimentConfig& c) -> double& {
                              return c.csc_rho;
                            }),
                            0, kInf, true, "> 0"));
    r.push_back(make_double("csc_code_density",
                            D([](ExperimentConfig& c) -> double& {
                              return c.csc_code_density;
                            }),
                            0, 1, true, "in (0, 1]"));
    r.push_back(make_int("csc_outer_iters",
                         I([](ExperimentConfig& c) -> int& {
                           return c.csc_outer_iters;
                         }),
                         1, 1000000, ">= 1"));
    r.push_back(make_int("csc_inner_passes",
                         I([](ExperimentConfig& c) -> int& {
                           return c.csc_inner_passes;
                         }),
                         1, 1000000, ">= 1"));
    r.push_back(make_int("csc_inpaint_passes",
                         I([](ExperimentConfig& c) -> int& {
                           return c.csc_inpaint_passes;
                         }),
                         1, 1000000, ">= 1"));
    r.push_back(make_int("csc_cg_iters",
                         I([](ExperimentConfig& c) -> int& {
                           return c.csc_cg_iters;
                         }),
                         1, 1000000, ">= 1"));
    r.push_back(make_double("csc_cg_tol",
                            D([](ExperimentConfig& c) -> double& {
                              return c.csc_cg_tol;
                            }),
                            0, kInf, true, "> 0"));
    r.push_back(make_double("keep_fraction",
                            D([](ExperimentConfig& c) -> double& {
                              return c.keep_fraction;
                            }),
                            0, 1, true, "in (0, 1]"));
    r.push_back(make_bool("contrast_normalize_input",
                          B([](ExperimentConfig& c) -> bool& {
                            return c.contrast_normalize_input;
                          })));

    r.push_back(make_int("toy_input_dim",
                         I([](ExperimentConfig& c) -> int& {
                           return c.toy_input_dim;
                         }),
                         1, 100000, ">= 1"));
    r.push_back(make_int("toy_hidden",
                         I([](ExperimentConfig& c) -> int& {
                           return c.toy_hidden;
                         }),
                         1, 100000, ">= 1"));
    r.push_back(make_int("toy_hidden_layers",
                         I([](ExperimentConfig& c) -> int& {
                           return c.toy_hidden_layers;
                         }),
                         1, 16, ">= 1 (and <= 16)"));
    r.push_back(make_int("toy_output_dim",
                         I([](ExperimentConfig& c) -> int& {
                           return c.toy_output_dim;
                         }),
                         1, 100000, ">= 1"));
    r.push_back(make_int("toy_samples",
                         I([](ExperimentConfig& c) -> int& {
                           return c.toy_samples;
                         }),
                         2, 100000000, ">= 2"));
    r.push_back(make_int("toy_epochs",
                         I([](ExperimentConfig& c) -> int& {
                           return c.toy_epochs;
                         }),
                         1, 100000000, ">= 1"));
    r.push_back(make_double("toy_noise",
                            D([](ExperimentConfig& c) -> double& {
                              return c.toy_noise;
                            }),
                            0, kInf, false, ">= 0"));
    r.push_back(make_double("lambda_mask",
                            D([](ExperimentConfig& c) -> double& {
                              return c.lambda_mask;
                            }),
                            0, kInf, false, ">= 0"));
    r.push_back(make_double("weight_reg",
                            D([](ExperimentConfig& c) -> double& {
                              return c.weight_reg;
                            }),
                            0, kInf, false, ">= 0"));
    r.push_back(make_double("lambda_weight_l1",
                            D([](ExperimentConfig& c) -> double& {
                              return c.lambda_weight_l1;
                            }),
                            0, kInf, false, ">= 0"));
    r.push_back(make_double("quantile_a",
                            D([](ExperimentConfig& c) -> double& {
                              return c.quantile_a;
                            }),
                            0, 1, true, "in (0, 1)"));
    r.push_back(make_enum("mask_init",
                          S([](ExperimentConfig& c) -> std::string& {
                            return c.mask_init;
                          }),
                          {"ones", "normal", "absnormal"}));
    r.push_back(make_bool("cosine_schedule",
                          B([](ExperimentConfig& c) -> bool& {
                            return c.cosine_schedule;
                          })));
    return r;
  }();
  return entries;
}

const Entry* find_entry(const std::string& key) {
  for (const auto& e : registry())
    if (e.key == key) return &e;
  return nullptr;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{
      "beale",       "bilinear-lsq", "csc-reconstruct",
      "csc-inpaint", "prune-toy",    "train-toy"};
  return names;
}

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  if (experiment == "beale") {
    c.coupling.alpha_sparse = 1.0;
    c.coupling.alpha_dense = 0.5;
    c.iterations = 200;
  } else if (experiment == "bilinear-lsq") {
    c.optimizer.kind = OptimizerKind::Sgd;
    c.optimizer.learning_rate = 0.02;
    c.learning_rate_dense = 0.02;
    c.coupling.alpha_sparse = 1.0;
    c.coupling.alpha_dense = 1.0;
    c.iterations = 200;
  } else if (experiment == "csc-reconstruct") {
    c.keep_fraction = 1.0;
    c.contrast_normalize_input = true;
  } else if (experiment == "csc-inpaint") {
    c.keep_fraction = 0.25;
    c.contrast_normalize_input = true;
    // backtracking calibrated to the per-filter coupling scale of this
    // problem family; the projection is applied every fifth epoch
    c.csc_lambda = 0.10;
    c.coupling.beta_scale = 1e4;
    c.coupling.period = 5;
    c.csc_inpaint_passes = 60;
  } else if (experiment == "prune-toy") {
    c.optimizer.kind = OptimizerKind::Momentum;
    c.optimizer.learning_rate = 0.01;
    c.optimizer.momentum = 0.9;
    c.coupling.alpha_sparse = 0.5;  // alpha_m, fixed threshold on |m_j|
    c.coupling.beta_scale = 500.0;  // calibrated to the mask-coupling scale
    c.lambda_mask = 0.02;
    c.quantile_a = 0.5;
    c.mask_init = "absnormal";
    c.cosine_schedule = false;
  } else if (experiment == "train-toy") {
    c.optimizer.kind = OptimizerKind::Momentum;
    c.optimizer.learning_rate = 0.01;
    c.optimizer.momentum = 0.9;
    c.coupling.beta_scale = 500.0;
    c.lambda_mask = 0.0;
    c.lambda_weight_l1 = 0.001;
    c.quantile_a = 0.95;
    c.mask_init = "ones";
    c.cosine_schedule = true;
    c.toy_epochs = 60;
    c.weight_reg = 0.0001;
  } else {
    throw InvalidInput("unknown experiment '" + experiment + "'");
  }
  return c;
}

ParseResult parse_config(const std::string& text) {
  ParseResult result;
  std::vector<std::pair<int, std::string>> lines;  // line number, content
  {
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      lines.emplace_back(number, t);
    }
  }

  // The experiment selects the defaults, so find it first.
  std::string experiment;
  for (const auto& [number, content] : lines) {
    const auto eq = content.find('=');
    if (eq == std::string::npos) continue;
    if (trim(content.substr(0, eq)) == "experiment")
      experiment = trim(content.substr(eq + 1));
  }
  if (experiment.empty()) {
    result.issues.push_back({0, "missing required key 'experiment'"});
    return result;
  }
  ExperimentConfig cfg;
  try {
    cfg = default_config(experiment);
  } catch (const InvalidInput&) {
    std::string msg = "experiment: '" + experiment + "' is not one of {";
    for (std::size_t i = 0; i < experiment_names().size(); ++i)
      msg += (i ? ", " : "") + experiment_names()[i];
    result.issues.push_back({0, msg + "}"});
    return result;
  }

  for (const auto& [number, content] : lines) {
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      result.issues.push_back(
          {number, "expected key=value, got '" + content + "'"});
      continue;
    }
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    const Entry* entry = find_entry(key);
    if (!entry) {
      result.issues.push_back({number, "unknown key '" + key + "'"});
      continue;
    }
    if (const std::string err = entry->set(cfg, value); !err.empty())
      result.issues.push_back({number, err});
  }

  if (result.issues.empty()) result.config = std::move(cfg);
  return result;
}

std::string apply_override(ExperimentConfig& cfg, const std::string& key,
                           const std::string& value) {
  const Entry* entry = find_entry(key);
  if (!entry) return "unknown key '" + key + "'";
  return entry->set(cfg, value);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  for (const auto& entry : registry())
    out << entry.key << '=' << entry.get(cfg) << '\n';
  return out.str();
}

}  // namespace cogd
