#include <CLI11.hpp>

#include <iostream>

#include "userprof/pipeline.hpp"
#include "userprof/synth.hpp"

namespace {

enum Exit { ok = 0, validation = 1, upstream = 2, runtime = 3 };

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return ok;
  } catch (const userprof::UpstreamMissing& e) {
    std::cerr << "error: " << e.what() << "\n";
    return upstream;
  } catch (const userprof::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return validation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return runtime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"User profiling pipeline"};
  app.require_subcommand(1);

  std::string config;
  bool force = false;
  for (const char* name : {"ingest", "kb", "filter", "sample", "pool", "statements", "profile", "evaluate",
                           "serve-annotation", "report", "all"}) {
    auto* sub = app.add_subcommand(name, std::string("Run ") + (std::string(name) == "all" ? "every stage" : name));
    sub->add_option("--config", config, "Pipeline config file")->required();
    sub->add_flag("--force", force, "Re-run even when artifacts are up to date");
  }

  std::string fixture;
  std::string out_dir;
  auto* synth = app.add_subcommand("synth", "Write a synthetic fixture");
  synth->add_option("kind", fixture, "e2e or default-shape")->required()->check(CLI::IsMember({"e2e", "default-shape"}));
  synth->add_option("--out", out_dir, "Output directory")->required();

  app.add_subcommand("defaults", "Print the default config");

  CLI11_PARSE(app, argc, argv);
  auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();

  if (name == "defaults") {
    std::cout << userprof::default_config_json();
    return ok;
  }
  if (name == "synth") {
    return run_guarded([&] {
      auto info = fixture == "e2e" ? userprof::synth::write_e2e_fixture(out_dir)
                                   : userprof::synth::write_default_shape_fixture(out_dir);
      std::cout << "wrote " << info.tweets << " tweets from " << info.users << " users; config "
                << info.config.string() << "\n";
    });
  }
  return run_guarded([&] {
    auto cfg = userprof::PipelineConfig::load(config);
    userprof::Pipeline pipeline(std::move(cfg), std::cout);
    if (name == "all") {
      pipeline.run_all(force);
    } else {
      pipeline.run(userprof::stage_from_string(name), force);
    }
  });
}
