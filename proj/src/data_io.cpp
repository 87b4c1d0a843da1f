#include "tailrep/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "tailrep/error.hpp"
#include "tailrep/evt.hpp"
#include "tailrep/json_io.hpp"
#include "tailrep/report.hpp"

namespace tailrep::data {
namespace {

// Lower Cholesky factor (l11, l21, l22) of a 2x2 SPD matrix.
std::array<double, 3> cholesky2(const std::array<double, 4>& c) {
  if (c[1] != c[2]) throw DomainError("covariance is not symmetric");
  if (!(c[0] > 0.0)) throw DomainError("covariance is not positive definite");
  const double l11 = std::sqrt(c[0]);
  const double l21 = c[2] / l11;
  const double rest = c[3] - l21 * l21;
  if (!(rest > 0.0)) throw DomainError("covariance is not positive definite");
  return {l11, l21, std::sqrt(rest)};
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_real(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("not a number: '" + s + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite value", line);
  return v;
}

long long parse_int(const std::string& s, std::size_t line) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("not an integer: '" + s + "'", line);
  return v;
}

int parse_label(const std::string& s, std::size_t line) {
  if (s == "1" || s == "+1") return 1;
  if (s == "-1") return -1;
  throw ParseError("label must be -1 or +1, got '" + s + "'", line);
}

std::size_t header_value(const std::string& field, const std::string& key, std::size_t line) {
  if (field.rfind(key + "=", 0) != 0) throw ParseError("expected '" + key + "=<int>'", line);
  const long long v = parse_int(field.substr(key.size() + 1), line);
  if (v < 1) throw ParseError(key + " must be positive", line);
  return static_cast<std::size_t>(v);
}

// Data lines with their 1-based numbers; blank and comment lines dropped.
std::vector<std::pair<std::size_t, std::string>> content_lines(const std::string& text) {
  std::vector<std::pair<std::size_t, std::string>> out;
  std::istringstream in(text);
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.emplace_back(no, t);
  }
  return out;
}

std::string format_row(int label, std::span<const double> v) {
  std::string out = label > 0 ? "1" : "-1";
  for (double x : v) out += "," + format_double(x);
  return out;
}

}  // namespace

MixtureSpec MixtureSpec::toy() {
  MixtureSpec s;
  s.components[0] = {{1.0, 1.0}, {1.0, 0.0, 0.0, 0.25}, 0.5, -1};
  s.components[1] = {{2.5, 1.0}, {1.0, 0.0, 0.0, 0.25}, 0.5, 1};
  return s;
}

void MixtureSpec::validate() const {
  const double total = components[0].weight + components[1].weight;
  if (!(components[0].weight >= 0.0 && components[1].weight >= 0.0) || std::abs(total - 1.0) > 1e-12) {
    throw DomainError("mixture weights must be nonnegative and sum to 1");
  }
  for (const auto& c : components) {
    if (c.label != 1 && c.label != -1) throw DomainError("component labels must be -1 or +1");
    cholesky2(c.covariance);
  }
}

LabeledDataset gen_gaussian_mixture(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n == 0) throw DomainError("mixture sample size must be positive");
  RngStream rng(seed);
  LabeledDataset out{Matrix(n, 2), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = spec.components[rng.uniform() < spec.components[0].weight ? 0 : 1];
    const auto l = cholesky2(c.covariance);
    const double e1 = rng.normal();
    const double e2 = rng.normal();
    out.x(i, 0) = c.mean[0] + l[0] * e1;
    out.x(i, 1) = c.mean[1] + l[1] * e1 + l[2] * e2;
    out.y[i] = c.label;
  }
  return out;
}

LabeledDataset gen_dependent_embedding(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n == 0) throw DomainError("sample size must be positive");
  if (d < 2) throw DomainError("dependent embedding needs d >= 2");
  RngStream rng(seed);
  LabeledDataset out{Matrix(n, d), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double r = 1.0 / rng.uniform();
    const double phi = rng.uniform(0.0, std::numbers::pi / 4.0);
    const double theta = phi + 0.15 * std::log(r);
    out.x(i, 0) = r * std::cos(theta);
    out.x(i, 1) = r * std::sin(theta);
    for (std::size_t j = 2; j < d; ++j) out.x(i, j) = 0.5 * r * std::cos(theta + static_cast<double>(j));
    out.y[i] = phi >= std::numbers::pi / 8.0 ? 1 : -1;
  }
  return out;
}

SequenceVocab SequenceVocab::for_size(std::size_t vocab) {
  if (vocab < 4) throw DomainError("vocabulary needs at least 4 tokens");
  SequenceVocab v;
  v.sectors = std::min<std::size_t>(8, vocab - 3);
  v.buckets = std::min<std::size_t>(2, vocab - 2 - v.sectors);
  return v;
}

augment::SequenceDataset gen_latent_sequences(const Matrix& latents, const LabeledDataset& inputs,
                                              std::size_t vocab, std::size_t t_max) {
  if (latents.rows() != inputs.size()) throw DomainError("latents and inputs differ in count");
  if (t_max < 1) throw DomainError("t_max must be positive");
  const SequenceVocab layout = SequenceVocab::for_size(vocab);
  const auto norms = row_norms(latents);
  std::vector<double> sorted = norms;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cuts;
  for (std::size_t b = 1; b < layout.buckets; ++b) cuts.push_back(sorted[b * sorted.size() / layout.buckets]);

  augment::SequenceDataset out{inputs.x, inputs.y, {}, vocab, t_max};
  out.sequences.reserve(latents.rows());
  for (std::size_t i = 0; i < latents.rows(); ++i) {
    const auto z = latents.row(i);
    const double angle = z.size() >= 2 ? std::atan2(z[1], z[0]) : (z[0] >= 0.0 ? 0.0 : std::numbers::pi);
    const double unit = (angle + std::numbers::pi) / (2.0 * std::numbers::pi);
    const auto sector = std::min(layout.sectors - 1, static_cast<std::size_t>(unit * static_cast<double>(layout.sectors)));
    const auto bucket = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), norms[i]) - cuts.begin());
    augment::Sequence s{layout.sector_token(sector), layout.bucket_token(bucket), augment::kStop};
    s.resize(std::min(s.size(), t_max));
    out.sequences.push_back(std::move(s));
  }
  return out;
}

augment::SequenceDataset gen_latent_sequences(const nn::Mlp& encoder, const LabeledDataset& inputs,
                                              std::size_t vocab, std::size_t t_max) {
  Matrix z(inputs.size(), encoder.output_dim());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto zi = encoder.forward(inputs.x.row(i));
    std::copy(zi.begin(), zi.end(), z.row(i).begin());
  }
  return gen_latent_sequences(z, inputs, vocab, t_max);
}

std::string format_embeddings(const LabeledDataset& data) {
  std::string out = "d=" + std::to_string(data.dimension()) + "\n";
  for (std::size_t i = 0; i < data.size(); ++i) out += format_row(data.y[i], data.x.row(i)) + "\n";
  return out;
}

LabeledDataset parse_embeddings(const std::string& text) {
  const auto lines = content_lines(text);
  if (lines.empty()) throw ParseError("missing 'd=<int>' header", 1);
  const std::size_t d = header_value(lines[0].second, "d", lines[0].first);
  LabeledDataset out{Matrix(0, d), {}};
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto& [no, line] = lines[l];
    const auto fields = split(line, ',');
    if (fields.size() != d + 1) {
      throw ParseError("expected " + std::to_string(d) + " values, got " + std::to_string(fields.size() - 1), no);
    }
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) row[j] = parse_real(fields[j + 1], no);
    out.y.push_back(parse_label(fields[0], no));
    out.x.append_row(row);
  }
  if (out.size() == 0) throw ParseError("no data rows", lines[0].first);
  return out;
}

void save_embeddings(const LabeledDataset& data, const std::string& path) {
  write_text_file(path, format_embeddings(data));
}

LabeledDataset load_embeddings(const std::string& path) { return parse_embeddings(read_text_file(path)); }

std::string format_sequences(const augment::SequenceDataset& data) {
  std::string out = "d=" + std::to_string(data.x.cols()) + " vocab=" + std::to_string(data.vocab) +
                    " tmax=" + std::to_string(data.t_max) + "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += format_row(data.labels[i], data.x.row(i)) + ",";
    for (std::size_t t = 0; t < data.sequences[i].size(); ++t) {
      out += (t ? " " : "") + std::to_string(data.sequences[i][t]);
    }
    out += "\n";
  }
  return out;
}

augment::SequenceDataset parse_sequences(const std::string& text) {
  const auto lines = content_lines(text);
  if (lines.empty()) throw ParseError("missing header", 1);
  const auto head = split(lines[0].second, ' ');
  if (head.size() != 3) throw ParseError("expected 'd=<int> vocab=<int> tmax=<int>'", lines[0].first);
  const std::size_t d = header_value(head[0], "d", lines[0].first);
  augment::SequenceDataset out{Matrix(0, d), {}, {}, header_value(head[1], "vocab", lines[0].first),
                               header_value(head[2], "tmax", lines[0].first)};
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto& [no, line] = lines[l];
    const auto fields = split(line, ',');
    if (fields.size() != d + 2) throw ParseError("expected label, " + std::to_string(d) + " values and tokens", no);
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) row[j] = parse_real(fields[j + 1], no);
    augment::Sequence seq;
    std::istringstream toks(fields[d + 1]);
    for (std::string tok; toks >> tok;) {
      const long long id = parse_int(tok, no);
      if (id < 0 || static_cast<std::size_t>(id) >= out.vocab) throw ParseError("token id out of range", no);
      seq.push_back(static_cast<int>(id));
    }
    if (seq.size() > out.t_max) throw ParseError("sequence longer than tmax", no);
    out.labels.push_back(parse_label(fields[0], no));
    out.x.append_row(row);
    out.sequences.push_back(std::move(seq));
  }
  if (out.size() == 0) throw ParseError("no data rows", lines[0].first);
  return out;
}

void save_sequences(const augment::SequenceDataset& data, const std::string& path) {
  write_text_file(path, format_sequences(data));
}

augment::SequenceDataset load_sequences(const std::string& path) { return parse_sequences(read_text_file(path)); }

}  // namespace tailrep::data
