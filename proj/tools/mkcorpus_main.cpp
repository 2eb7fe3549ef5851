// Generates the seeded synthetic-shapes study corpus (images + fixations.csv)
// used by the examples and the end-to-end tests.
#include <CLI11.hpp>

#include <xstab/xstab.h>

#include <cstdint>
#include <cstdio>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Write a synthetic-shapes corpus: <out>/images/img_###.png + fixations.csv"};
  std::string out;
  std::size_t count = 10;
  std::uint64_t seed = 0;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--count", count, "Number of images");
  app.add_option("--seed", seed, "Master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const xstab_status st = xstab_synth_corpus(out.c_str(), count, seed);
  if (st != XSTAB_OK) {
    std::fprintf(stderr, "xstab-mkcorpus: %s: %s\n", xstab_status_name(st), xstab_last_error());
    return st == XSTAB_E_CONFIG ? 2 : 3;
  }
  return 0;
}
