// Serves a built-in MLP over the runner protocol on stdin/stdout.
//
//   nlc_serve_mlp model.json

#include <cstdio>
#include <iostream>

#include "nlc/mlp.hpp"
#include "nlc/runner.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: nlc_serve_mlp <model.json>\n";
    return 2;
  }
  std::ios::sync_with_stdio(false);
  try {
    const auto model = nlc::load_mlp(argv[1]);
    nlc::serve_mlp(model, std::cin, std::cout);
  } catch (const nlc::Error& e) {
    std::cerr << "error[" << nlc::errc_name(e.code()) << "]: " << e.what() << '\n';
    return e.code() == nlc::Errc::runner ? 4 : 3;
  }
  return 0;
}
