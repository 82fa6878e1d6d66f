#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "noisebench/synth.hpp"

// Generates a procedural image corpus in CIFAR-10 binary layout (five
// 10000-record train batches plus test_batch.bin) for self-contained test and
// benchmark runs.
int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic corpus in CIFAR-10 binary layout"};
  std::string out_dir;
  std::uint64_t seed = 2026;
  bool force = false;
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--seed", seed, "generator seed")->capture_default_str();
  app.add_flag("--force", force, "regenerate even if the corpus already exists");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      std::cout << app.help();
      return 0;
    }
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (force) {
      noisebench::write_synth_corpus(out_dir, seed);
      std::cout << "regenerated corpus in " << out_dir << " (seed " << seed << ")\n";
    } else if (noisebench::ensure_synth_corpus(out_dir, seed)) {
      std::cout << "generated corpus in " << out_dir << " (seed " << seed << ")\n";
    } else {
      std::cout << "corpus already present in " << out_dir << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
