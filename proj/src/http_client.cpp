// Eigen comes first: <resolv.h>, pulled in by httplib, defines a `_res`
// macro that clashes with Eigen's internals.
#include "craft/orchestrator.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <openssl/evp.h>

#include "craft/errors.hpp"

namespace craft {

using json = nlohmann::json;

namespace {

std::string base64(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string mime_type(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "image/png";
}

std::string data_url(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return "data:" + mime_type(path) + ";base64," + base64(ss.str());
}

}  // namespace

HttpClient::HttpClient(HttpClientConfig config) : config_(std::move(config)) {
  if (config_.endpoint.find("://") == std::string::npos) throw Error("endpoint must include a scheme: " + config_.endpoint);
}

json HttpClient::request_body(const std::vector<Message>& messages) const {
  json msgs = json::array();
  for (const Message& m : messages) {
    if (!m.image) {
      msgs.push_back({{"role", m.role}, {"content", m.content}});
      continue;
    }
    json parts = json::array();
    parts.push_back({{"type", "text"}, {"text", m.content}});
    parts.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url(*m.image)}}}});
    msgs.push_back({{"role", m.role}, {"content", parts}});
  }
  return {{"model", config_.model}, {"messages", msgs}};
}

std::string HttpClient::send(const std::vector<Message>& messages) {
  const std::string& url = config_.endpoint;
  const std::size_t scheme_end = url.find("://") + 3;
  const std::size_t path_start = url.find('/', scheme_end);
  const std::string origin = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  const std::string body = request_body(messages).dump();
  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::lock_guard lock(mutex_);
  httplib::Client client(origin);
  client.set_connection_timeout(config_.timeout_s, 0);
  client.set_read_timeout(config_.timeout_s, 0);
  client.set_write_timeout(config_.timeout_s, 0);
  const httplib::Result res = client.Post(path, headers, body, "application/json");
  if (!res) throw ClientError("request to " + url + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw ClientError("request to " + url + " returned HTTP " + std::to_string(res->status) + ": " +
                      res->body.substr(0, 500));
  }
  try {
    const json reply = json::parse(res->body);
    const json& content = reply.at("choices").at(0).at("message").at("content");
    return content.is_string() ? content.get<std::string>() : content.dump();
  } catch (const json::exception& e) {
    throw ClientError(std::string("malformed chat-completions reply: ") + e.what());
  }
}

}  // namespace craft
