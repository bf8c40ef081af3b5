// Scripted runner child for protocol tests.
//
//   fixture_runner <mode> H W C
//
// echo      activations = flattened input (one layer), label 0
// truncate  answers the first request with half a frame, then exits
// crash     aborts on the first request
// garbage   sends a malformed handshake
// hang      handshakes, then never answers
// badtag    answers with a frame tagged 7

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include "nlc/runner.hpp"

int main(int argc, char** argv) {
  if (argc != 5) return 2;
  const std::string mode = argv[1];
  nlc::ModelInfo info;
  info.input_shape = {std::stoul(argv[2]), std::stoul(argv[3]), std::stoul(argv[4])};
  info.layers = {{"input", info.input_dim()}};
  info.classes = 2;

  if (mode == "garbage") {
    std::cout << "{not json\n" << std::flush;
    return 0;
  }
  std::cout << nlc::protocol::handshake_line(info) << std::flush;
  if (mode == "hang") {
    std::this_thread::sleep_for(std::chrono::seconds(60));
    return 0;
  }
  try {
    while (auto img = nlc::protocol::read_request(std::cin, info)) {
      if (mode == "crash") std::abort();
      nlc::RunResult r;
      r.label = 0;
      r.activations = {img->flatten()};
      auto frame = nlc::protocol::encode_response(r);
      if (mode == "truncate") {
        std::cout.write(frame.data(), static_cast<std::streamsize>(frame.size() / 2)) << std::flush;
        return 0;
      }
      if (mode == "badtag") frame[4] = 7;
      std::cout.write(frame.data(), static_cast<std::streamsize>(frame.size())) << std::flush;
    }
  } catch (const nlc::Error& e) {
    std::cerr << e.what() << '\n';
    return 4;
  }
  return 0;
}
