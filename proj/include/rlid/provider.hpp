#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "rlid/labels.hpp"

// Translation providers for dataset generation. The fixture provider answers
// from a TSV file and is what every reproducible run uses; the HTTP provider
// talks to a Google-Translate-v2-shaped endpoint for regenerating real data.
namespace rlid::provider {

struct TranslationRequest {
  std::string text;
  LanguageLabel target;
};

enum class ProviderKind { kFixture, kHttp };

std::string_view to_string(ProviderKind kind);
ProviderKind parse_provider_kind(std::string_view name);

struct ProviderConfig {
  ProviderKind kind = ProviderKind::kFixture;
  std::optional<std::filesystem::path> fixture_path;
  std::optional<std::string> endpoint;
  std::optional<std::string> api_key_env;  // name of the variable, never the key
  std::optional<std::filesystem::path> cache_dir;
  std::chrono::milliseconds timeout{10000};
  int max_retries = 3;
  std::chrono::milliseconds retry_backoff{250};  // first backoff; doubles per retry

  // Throws UsageError: fixture needs fixture_path, http needs endpoint.
  void validate() const;
};

class TranslationProvider {
 public:
  virtual ~TranslationProvider() = default;
  virtual std::string translate(const TranslationRequest& request) = 0;
  virtual ProviderKind kind() const = 0;
};

// (source text, target label name) -> translation.
using FixtureKey = std::pair<std::string, std::string>;
using FixtureMap = std::map<FixtureKey, std::string>;

// `source<TAB>target-label<TAB>translation` per line. DataError with the line
// number on malformed lines or duplicate keys.
FixtureMap parse_fixtures(std::string_view content);
FixtureMap load_fixtures(const std::filesystem::path& path);

class FixtureProvider final : public TranslationProvider {
 public:
  explicit FixtureProvider(FixtureMap fixtures) : fixtures_(std::move(fixtures)) {}

  // DataError naming the (text, label) key when it is missing.
  std::string translate(const TranslationRequest& request) override;
  ProviderKind kind() const override { return ProviderKind::kFixture; }

  std::size_t lookup_count() const { return lookups_.load(); }
  const FixtureMap& fixtures() const { return fixtures_; }

 private:
  FixtureMap fixtures_;
  std::atomic<std::size_t> lookups_{0};
};

// ISO 639-1 code sent to the service for a label ("hindi" -> "hi"); unknown
// names are passed through unchanged.
std::string language_code(std::string_view label_name);

class HttpProvider final : public TranslationProvider {
 public:
  // Reads the API key from the environment at construction.
  explicit HttpProvider(const ProviderConfig& config);

  std::string translate(const TranslationRequest& request) override;
  ProviderKind kind() const override { return ProviderKind::kHttp; }

  std::size_t request_count() const { return requests_.load(); }

 private:
  std::string base_url_;
  std::string path_;
  std::string api_key_;
  std::chrono::milliseconds timeout_;
  int max_retries_;
  std::chrono::milliseconds retry_backoff_;
  std::atomic<std::size_t> requests_{0};
};

// Hex SHA-256 over (kind, label, text); one cache file per key.
std::string cache_key(std::string_view text, std::string_view label_name, ProviderKind kind);

class CachingProvider final : public TranslationProvider {
 public:
  CachingProvider(std::unique_ptr<TranslationProvider> inner, std::filesystem::path cache_dir);

  std::string translate(const TranslationRequest& request) override;
  ProviderKind kind() const override { return inner_->kind(); }

  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }
  TranslationProvider& inner() { return *inner_; }

 private:
  std::unique_ptr<TranslationProvider> inner_;
  std::filesystem::path cache_dir_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

// Builds the configured provider, wrapped in a cache when cache_dir is set.
std::unique_ptr<TranslationProvider> make_provider(const ProviderConfig& config);

// One-shot convenience over make_provider.
std::string translate(const TranslationRequest& request, const ProviderConfig& config);

}  // namespace rlid::provider
