// Writes the synthetic test scene as a bundle directory.
#include <CLI11.hpp>
#include <iostream>

#include "urbanfuture/error.hpp"
#include "urbanfuture/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write the synthetic one-vehicle scene bundle", "make_synthetic_bundle"};
  std::string out = "data/synthetic_bundle";
  bool plate = false;
  app.add_option("out", out, "Destination directory")->capture_default_str();
  app.add_flag("--clean-plate", plate, "Also write the vehicle-free road as clean_plate.png");
  CLI11_PARSE(app, argc, argv);
  try {
    const auto scene = urbanfuture::make_synthetic_scene();
    urbanfuture::write_bundle(scene.bundle, out, scene.frames);
    if (plate) urbanfuture::write_png(std::filesystem::path(out) / "clean_plate.png", scene.clean_plate);
    std::cout << out << '\n';
  } catch (const urbanfuture::Error& e) {
    std::cerr << "error: " << urbanfuture::to_string(e.kind()) << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
