#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "ulab/acceptance.hpp"
#include "ulab/error.hpp"
#include "ulab/harness.hpp"
#include "ulab/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"unipotent-lab: numerical experiments on unipotent flows on SL2(R) x SL2(R) / Gamma"};
  app.set_version_flag("--version", std::string(ulab::code_version()));
  app.require_subcommand(1);
  app.fallthrough();

  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = all cores); results do not depend on it");

  std::string config, out;
  auto* run = app.add_subcommand("run", "run one experiment from a JSON config");
  run->add_option("config", config, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "run directory (default: output_dir from the config, else ./run)");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "merge every run under DIR into DIR/report.json");
  report->add_option("dir", report_dir, "directory of runs")->required();

  std::string accept_dir = "acceptance-out";
  auto* accept = app.add_subcommand("accept", "run acceptance criteria 1..8");
  accept->add_option("--out", accept_dir, "output directory");

  std::string schema_path = "SCHEMA.md";
  auto* schema = app.add_subcommand("schema", "write the config and results schema as Markdown");
  schema->add_option("--out", schema_path, "destination file ('-' for stdout)");

  auto* list = app.add_subcommand("list", "list experiment names");

  CLI11_PARSE(app, argc, argv);
  ulab::set_threads(threads);

  try {
    if (*run) {
      auto cfg = ulab::load_config(config);
      std::string dir = !out.empty() ? out : (!cfg.output_dir.empty() ? cfg.output_dir : "run");
      int code = ulab::run_experiment(cfg, dir);
      const char* what[] = {"pass", "error", "invalid config", "assertion failed"};
      std::cerr << cfg.experiment << ": " << what[code] << " (" << dir << ")\n";
      if (code == ulab::kRunInvalid) {
        for (const auto& v : ulab::validate_config(cfg)) std::cerr << "  " << v << "\n";
      }
      return code;
    }
    if (*report) {
      auto rep = ulab::emit_report(report_dir);
      std::cout << rep.doc.dump(2) << "\n";
      return rep.exit_code;
    }
    if (*accept) {
      bool all = true;
      for (int k = 1; k <= 8; ++k) {
        auto r = ulab::run_criterion(k, accept_dir);
        std::cout << ulab::format_line(r) << std::endl;
        all = all && r.pass;
      }
      return all ? 0 : 1;
    }
    if (*schema) {
      if (schema_path == "-")
        std::cout << ulab::schema_markdown();
      else
        ulab::atomic_write(schema_path, ulab::schema_markdown());
      return 0;
    }
    if (*list) {
      for (const auto& n : ulab::experiment_names()) std::cout << n << "\n";
      return 0;
    }
  } catch (const ulab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
