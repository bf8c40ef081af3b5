#pragma once

// Model runners: the in-process MLP and an external child process speaking
// the framed runner protocol.
//
// Protocol. The child first writes one JSON line on stdout:
//   {"layers":[{"name":"fc1","neurons":8},...],"input":[H,W,C],"classes":c}
// after which every exchange is a pair of frames
//   u32 payload length (LE) | u8 tag | payload
// tag 1 = request  (payload: H*W*C f32 LE pixels, HWC order)
// tag 2 = response (payload: u32 label | concatenated layer activations f32 LE)

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlc/bytes.hpp"
#include "nlc/error.hpp"
#include "nlc/image.hpp"
#include "nlc/mlp.hpp"

namespace nlc {

inline constexpr std::uint8_t kFrameRequest = 1;
inline constexpr std::uint8_t kFrameResponse = 2;
inline constexpr std::uint32_t kMaxFrameBytes = 1u << 30;

class Runner {
 public:
  virtual ~Runner() = default;
  virtual const ModelInfo& info() const = 0;
  virtual RunResult run(const ImageTensor& image) = 0;
  /// True when run() may be called from several threads at once.
  virtual bool concurrent() const { return false; }
};

class MlpRunner final : public Runner {
 public:
  explicit MlpRunner(MlpModel model) : model_(std::move(model)), info_(model_.info()) {}

  const ModelInfo& info() const override { return info_; }
  RunResult run(const ImageTensor& image) override {
    check_image(image);
    return model_.forward(image);
  }
  bool concurrent() const override { return true; }
  const MlpModel& model() const noexcept { return model_; }

 private:
  void check_image(const ImageTensor& image) const {
    if (image.height != info_.input_shape[0] || image.width != info_.input_shape[1] ||
        image.channels != info_.input_shape[2]) {
      fail(Errc::shape_mismatch, "image shape does not match the model input shape");
    }
  }

  MlpModel model_;
  ModelInfo info_;
};

// ---------------------------------------------------------------------------
// Protocol codec, shared by the engine side and by servers.

namespace protocol {

inline std::string handshake_line(const ModelInfo& info) {
  nlohmann::json j;
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& l : info.layers) layers.push_back({{"name", l.name}, {"neurons", l.neurons}});
  j["input"] = info.input_shape;
  j["classes"] = info.classes;
  return j.dump() + "\n";
}

inline ModelInfo parse_handshake(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    ModelInfo info;
    for (const auto& l : j.at("layers")) info.layers.push_back({l.at("name").get<std::string>(), l.at("neurons").get<std::size_t>()});
    info.input_shape = j.at("input").get<std::array<std::size_t, 3>>();
    info.classes = j.at("classes").get<std::size_t>();
    validate_layers(info.layers);
    if (info.input_dim() == 0) fail(Errc::runner, "handshake declares an empty input");
    if (info.classes == 0) fail(Errc::runner, "handshake declares zero classes");
    return info;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::runner, std::string("protocol violation: bad handshake: ") + e.what());
  } catch (const Error& e) {
    fail(Errc::runner, std::string("protocol violation: bad handshake: ") + e.what());
  }
}

inline std::string encode_frame(std::uint8_t tag, const std::string& payload) {
  std::string out;
  bytes::put<std::uint32_t>(out, static_cast<std::uint32_t>(payload.size()));
  bytes::put<std::uint8_t>(out, tag);
  out += payload;
  return out;
}

inline std::string encode_request(const ImageTensor& image) {
  std::string payload;
  payload.reserve(image.size() * 4);
  for (float v : image.data) bytes::put<float>(payload, v);
  return encode_frame(kFrameRequest, payload);
}

inline std::string encode_response(const RunResult& r) {
  std::string payload;
  bytes::put<std::uint32_t>(payload, r.label);
  for (const auto& layer : r.activations) {
    for (double v : layer) bytes::put<float>(payload, static_cast<float>(v));
  }
  return encode_frame(kFrameResponse, payload);
}

inline RunResult decode_response_payload(const std::string& payload, const ModelInfo& info) {
  const std::size_t expected = 4 + 4 * total_neurons(info.layers);
  if (payload.size() != expected) {
    fail(Errc::runner, "protocol violation: response payload is " + std::to_string(payload.size()) +
                           " bytes, expected " + std::to_string(expected));
  }
  RunResult r;
  const char* p = payload.data();
  r.label = bytes::get<std::uint32_t>(p);
  p += 4;
  if (r.label >= info.classes) fail(Errc::runner, "protocol violation: label out of range");
  for (const auto& l : info.layers) {
    std::vector<double> act(l.neurons);
    for (auto& v : act) {
      v = bytes::get<float>(p);
      p += 4;
    }
    r.activations.push_back(std::move(act));
  }
  return r;
}

/// Server side: blocking read of one request; nullopt on clean EOF before a
/// frame starts.
inline std::optional<ImageTensor> read_request(std::istream& in, const ModelInfo& info) {
  char head[5];
  in.read(head, 5);
  if (in.gcount() == 0) return std::nullopt;
  if (in.gcount() != 5) fail(Errc::runner, "protocol violation: truncated frame header");
  const auto len = bytes::get<std::uint32_t>(head);
  const auto tag = bytes::get<std::uint8_t>(head + 4);
  if (tag != kFrameRequest) fail(Errc::runner, "protocol violation: expected request tag 1, got " + std::to_string(tag));
  if (len != info.input_dim() * 4) {
    fail(Errc::runner, "protocol violation: request payload is " + std::to_string(len) + " bytes, expected " +
                           std::to_string(info.input_dim() * 4));
  }
  std::string payload(len, '\0');
  in.read(payload.data(), len);
  if (static_cast<std::size_t>(in.gcount()) != len) fail(Errc::runner, "protocol violation: truncated request payload");
  ImageTensor img(info.input_shape[0], info.input_shape[1], info.input_shape[2]);
  for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = bytes::get<float>(payload.data() + 4 * i);
  return img;
}

}  // namespace protocol

// ---------------------------------------------------------------------------

/// Child process behind the framed protocol. One handle = one child; requests
/// are strictly serialized.
class ExternalRunner final : public Runner {
 public:
  explicit ExternalRunner(const std::string& command, std::chrono::milliseconds timeout = std::chrono::seconds(30))
      : command_(command), timeout_(timeout) {
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) fail(Errc::runner, "pipe() failed");
    pid_ = ::fork();
    if (pid_ < 0) fail(Errc::runner, "fork() failed");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      // Simple commands replace the shell so exit signals reach us directly.
      const bool compound = command.find_first_of(";&|\n") != std::string::npos;
      const std::string line = compound ? command : "exec " + command;
      ::execl("/bin/sh", "sh", "-c", line.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    ::fcntl(write_fd_, F_SETFD, FD_CLOEXEC);
    ::fcntl(read_fd_, F_SETFD, FD_CLOEXEC);

    try {
      info_ = protocol::parse_handshake(read_line());
    } catch (...) {
      shutdown();
      throw;
    }
  }

  ExternalRunner(const ExternalRunner&) = delete;
  ExternalRunner& operator=(const ExternalRunner&) = delete;

  ~ExternalRunner() override { shutdown(); }

  const ModelInfo& info() const override { return info_; }

  RunResult run(const ImageTensor& image) override {
    if (dead_) fail(Errc::runner, "runner '" + command_ + "' is no longer usable");
    if (image.height != info_.input_shape[0] || image.width != info_.input_shape[1] ||
        image.channels != info_.input_shape[2]) {
      fail(Errc::shape_mismatch, "image shape does not match the runner handshake");
    }
    try {
      write_all(protocol::encode_request(image));
      std::string head = read_exact(5);
      const auto len = bytes::get<std::uint32_t>(head.data());
      const auto tag = bytes::get<std::uint8_t>(head.data() + 4);
      if (tag != kFrameResponse) {
        fail(Errc::runner, "protocol violation: expected response tag 2, got " + std::to_string(tag));
      }
      if (len > kMaxFrameBytes) fail(Errc::runner, "protocol violation: frame length " + std::to_string(len));
      return protocol::decode_response_payload(read_exact(len), info_);
    } catch (...) {
      dead_ = true;
      throw;
    }
  }

  pid_t pid() const noexcept { return pid_; }

 private:
  void write_all(const std::string& data) {
    const char* p = data.data();
    std::size_t left = data.size();
    while (left > 0) {
      const auto n = ::write(write_fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(Errc::runner, "runner '" + command_ + "' stopped accepting input: " + std::strerror(errno) + child_status());
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
  }

  void wait_readable() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) fail(Errc::runner, "runner '" + command_ + "' timed out");
      pollfd pfd{read_fd_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (rc < 0 && errno == EINTR) continue;
      if (rc < 0) fail(Errc::runner, "poll() failed");
      if (rc == 0) fail(Errc::runner, "runner '" + command_ + "' timed out");
      return;
    }
  }

  std::string read_exact(std::size_t n) {
    std::string out;
    out.reserve(n);
    while (out.size() < n) {
      if (buffered_.empty()) fill();
      const auto take = std::min(n - out.size(), buffered_.size());
      out.append(buffered_, 0, take);
      buffered_.erase(0, take);
    }
    return out;
  }

  std::string read_line() {
    std::string line;
    for (;;) {
      const auto nl = buffered_.find('\n');
      if (nl != std::string::npos) {
        line += buffered_.substr(0, nl);
        buffered_.erase(0, nl + 1);
        return line;
      }
      line += buffered_;
      buffered_.clear();
      if (line.size() > (1u << 20)) fail(Errc::runner, "protocol violation: handshake line too long");
      fill();
    }
  }

  void fill() {
    wait_readable();
    char buf[65536];
    for (;;) {
      const auto n = ::read(read_fd_, buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n < 0) fail(Errc::runner, std::string("read from runner failed: ") + std::strerror(errno));
      if (n == 0) {
        fail(Errc::runner, "framed read failed: runner '" + command_ + "' closed its output" + child_status());
      }
      buffered_.append(buf, static_cast<std::size_t>(n));
      return;
    }
  }

  std::string child_status() {
    int status = 0;
    pid_t r = 0;
    // The pipe closes a moment before the process can be reaped.
    for (int i = 0; i < 50 && r == 0; ++i) {
      r = ::waitpid(pid_, &status, WNOHANG);
      if (r == 0) ::usleep(2000);
    }
    if (r == pid_) {
      reaped_ = true;
      if (WIFEXITED(status)) return " (child exited with status " + std::to_string(WEXITSTATUS(status)) + ")";
      if (WIFSIGNALED(status)) return " (child killed by signal " + std::to_string(WTERMSIG(status)) + ")";
    }
    return "";
  }

  void shutdown() noexcept {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    write_fd_ = read_fd_ = -1;
    if (pid_ > 0 && !reaped_) {
      int status = 0;
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
        ::usleep(2000);
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  bool dead_ = false;
  bool reaped_ = false;
  std::string buffered_;
  ModelInfo info_;
};

/// Serves `model` on the given streams until EOF; protocol errors throw.
inline void serve_mlp(const MlpModel& model, std::istream& in, std::ostream& out) {
  const auto info = model.info();
  out << protocol::handshake_line(info);
  out.flush();
  while (auto img = protocol::read_request(in, info)) {
    const auto frame = protocol::encode_response(model.forward(*img));
    out.write(frame.data(), static_cast<std::streamsize>(frame.size()));
    out.flush();
  }
}

}  // namespace nlc
