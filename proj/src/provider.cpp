#include "rlid/provider.hpp"

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <cstdlib>
#include <random>
#include <thread>

#include "rlid/error.hpp"
#include "rlid/io.hpp"
#include "rlid/text.hpp"

namespace rlid::provider {

std::string_view to_string(ProviderKind kind) {
  return kind == ProviderKind::kFixture ? "fixture" : "http";
}

ProviderKind parse_provider_kind(std::string_view name) {
  if (name == "fixture") return ProviderKind::kFixture;
  if (name == "http") return ProviderKind::kHttp;
  throw UsageError("unknown provider kind '" + std::string(name) + "' (fixture, http)");
}

void ProviderConfig::validate() const {
  if (kind == ProviderKind::kFixture && !fixture_path) {
    throw UsageError("the fixture provider needs a fixture file");
  }
  if (kind == ProviderKind::kHttp && (!endpoint || endpoint->empty())) {
    throw UsageError("the http provider needs an endpoint URL");
  }
  if (max_retries < 0) throw UsageError("max_retries must be non-negative");
  if (timeout.count() <= 0) throw UsageError("timeout must be positive");
}

FixtureMap parse_fixtures(std::string_view content) {
  if (auto bad = text::find_invalid_utf8(content)) {
    throw DataError("malformed UTF-8 at byte offset " + std::to_string(*bad));
  }
  FixtureMap fixtures;
  const auto lines = io::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i].front() == '#') continue;
    const auto fields = io::split(lines[i], '\t');
    const std::string where = "line " + std::to_string(i + 1) + ": ";
    if (fields.size() != 3) {
      throw DataError(where + "expected source<TAB>target-label<TAB>translation, found " +
                      std::to_string(fields.size()) + " fields");
    }
    if (fields[0].empty()) throw DataError(where + "empty source text");
    FixtureKey key{std::string(fields[0]), std::string(fields[1])};
    if (!fixtures.emplace(key, std::string(fields[2])).second) {
      throw DataError(where + "duplicate fixture key ('" + key.first + "', " + key.second + ")");
    }
  }
  return fixtures;
}

FixtureMap load_fixtures(const std::filesystem::path& path) {
  const std::string content = io::read_file(path);
  try {
    return parse_fixtures(content);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string FixtureProvider::translate(const TranslationRequest& request) {
  ++lookups_;
  auto it = fixtures_.find({request.text, request.target.name});
  if (it == fixtures_.end()) {
    throw DataError("no fixture translation for ('" + request.text + "', " + request.target.name + ")");
  }
  return it->second;
}

std::string language_code(std::string_view label_name) {
  static const std::map<std::string, std::string, std::less<>> codes{
      {"chinese", "zh"}, {"english", "en"}, {"hindi", "hi"}, {"russian", "ru"}};
  auto it = codes.find(label_name);
  return it != codes.end() ? it->second : std::string(label_name);
}

namespace {

// Splits "scheme://host[:port]/path" into the client base and the path.
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw UsageError("endpoint '" + url + "' is not an absolute URL");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

HttpProvider::HttpProvider(const ProviderConfig& config)
    : timeout_(config.timeout), max_retries_(config.max_retries), retry_backoff_(config.retry_backoff) {
  if (!config.endpoint) throw UsageError("the http provider needs an endpoint URL");
  std::tie(base_url_, path_) = split_url(*config.endpoint);
  if (config.api_key_env && !config.api_key_env->empty()) {
    const char* key = std::getenv(config.api_key_env->c_str());
    if (key == nullptr || *key == '\0') {
      throw UsageError("environment variable " + *config.api_key_env + " holding the API key is not set");
    }
    api_key_ = key;
  }
}

std::string HttpProvider::translate(const TranslationRequest& request) {
  httplib::Client client(base_url_);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("X-Goog-Api-Key", api_key_);
  const nlohmann::json body{{"q", request.text},
                            {"source", "en"},
                            {"target", language_code(request.target.name)},
                            {"format", "text"}};
  const std::string payload = body.dump();

  // Jitter only spreads retries in time; it never influences results.
  std::minstd_rand jitter(static_cast<unsigned>(std::hash<std::string>{}(request.text)));
  std::string last_error;
  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    if (attempt > 0) {
      const auto base = retry_backoff_ * (1LL << std::min(attempt - 1, 16));
      const auto extra = std::chrono::milliseconds(
          base.count() > 0 ? static_cast<long long>(jitter() % static_cast<unsigned>(base.count())) : 0);
      std::this_thread::sleep_for(base + extra);
    }
    ++requests_;
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      try {
        const auto json = nlohmann::json::parse(res->body);
        return json.at("data").at("translations").at(0).at("translatedText").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw DataError("unexpected translation response: " + std::string(e.what()));
      }
    }
    last_error = "HTTP status " + std::to_string(res->status);
    if (!retryable(res->status)) break;
  }
  throw DataError("translation of '" + request.text + "' to " + request.target.name + " failed: " +
                  last_error);
}

std::string cache_key(std::string_view text, std::string_view label_name, ProviderKind kind) {
  std::string material;
  material += to_string(kind);
  material += '\0';
  material += label_name;
  material += '\0';
  material += text;

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(material.data(), material.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xF]);
  }
  return hex;
}

CachingProvider::CachingProvider(std::unique_ptr<TranslationProvider> inner, std::filesystem::path cache_dir)
    : inner_(std::move(inner)), cache_dir_(std::move(cache_dir)) {
  std::error_code ec;
  std::filesystem::create_directories(cache_dir_, ec);
  if (ec) throw DataError("cannot create cache directory '" + cache_dir_.string() + "'");
}

std::string CachingProvider::translate(const TranslationRequest& request) {
  const auto path = cache_dir_ / (cache_key(request.text, request.target.name, inner_->kind()) + ".txt");
  if (std::filesystem::exists(path)) {
    ++hits_;
    return io::read_file(path);
  }
  ++misses_;
  std::string result = inner_->translate(request);
  io::write_file(path, result);
  return result;
}

std::unique_ptr<TranslationProvider> make_provider(const ProviderConfig& config) {
  config.validate();
  std::unique_ptr<TranslationProvider> provider;
  if (config.kind == ProviderKind::kFixture) {
    provider = std::make_unique<FixtureProvider>(load_fixtures(*config.fixture_path));
  } else {
    provider = std::make_unique<HttpProvider>(config);
  }
  if (config.cache_dir) {
    provider = std::make_unique<CachingProvider>(std::move(provider), *config.cache_dir);
  }
  return provider;
}

std::string translate(const TranslationRequest& request, const ProviderConfig& config) {
  if (request.text.empty()) throw DataError("translation request with empty text");
  return make_provider(config)->translate(request);
}

}  // namespace rlid::provider
