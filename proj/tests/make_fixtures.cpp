// Regenerates the committed persistence fixtures: make_fixtures <dir>
#include <filesystem>
#include <iostream>

#include "fixture_models.hpp"
#include "logonet/persistence.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <dir>\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  logonet::save_checkpoint(logonet::testing::formula_model(), dir / "formula_model.lgn");
  logonet::save_gallery(logonet::testing::formula_gallery(), dir / "formula_gallery.lgg");
  return 0;
}
