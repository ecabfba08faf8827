// Standalone webhook device for manual runs against `gls serve`.

#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "gls/mock_device.hpp"

namespace {
volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mock IFTTT-style webhook device"};
  std::string host = "127.0.0.1", key;
  int port = 8765, status = 200;
  app.add_option("--host", host);
  app.add_option("--port", port);
  app.add_option("--key", key, "accept only this webhook key");
  app.add_option("--status", status, "status code to answer with");
  CLI11_PARSE(app, argc, argv);

  gls::MockDeviceServer device(key, host, port);
  device.set_default_status(status);
  std::cout << "mock device on " << device.base_url() << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::size_t seen = 0;
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    auto reqs = device.requests();
    for (; seen < reqs.size(); ++seen)
      std::cout << reqs[seen].status << " " << reqs[seen].event << " " << reqs[seen].idempotency_key << " "
                << reqs[seen].body << std::endl;
  }
  return 0;
}
