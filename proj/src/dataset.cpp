#include "hsum/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "hsum/array_io.hpp"
#include "hsum/error.hpp"
#include "hsum/random.hpp"

namespace hsum {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "hsum-manifest/1";

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FileError("cannot open " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw FileError("cannot open " + path.string() + " for writing");
  }
  out << doc.dump(2) << '\n';
}

// Reads only the 8-byte header to learn an array's shape.
std::pair<int, int> array_shape(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FileError("referenced file does not exist: " + path.string());
  }
  unsigned char header[kArrayHeaderBytes];
  if (!in.read(reinterpret_cast<char*>(header), sizeof(header)) ||
      !std::equal(header, header + 4, kArrayMagic)) {
    throw SchemaError(path.string() + ": not an HSUM array");
  }
  return {header[4] | (header[5] << 8), header[6] | (header[7] << 8)};
}

template <class T>
std::vector<T> get_array(const json& doc, const char* key, const std::string& where) {
  try {
    return doc.at(key).get<std::vector<T>>();
  } catch (const json::exception& e) {
    throw SchemaError(where + ": field '" + key + "': " + e.what());
  }
}

void check_binary(std::span<const int> v, const std::string& what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0 && v[i] != 1) {
      throw InvariantError(what + "[" + std::to_string(i) + "] = " + std::to_string(v[i]) +
                           " is not binary");
    }
  }
}

}  // namespace

void VideoSample::validate(bool require_supervision) const {
  const int n = num_frames();
  const std::string where = "video '" + video_id + "'";
  if (n < 1) {
    throw InvariantError(where + ": has no frames");
  }
  if (!frame_features.allFinite()) {
    throw InvariantError(where + ": non-finite frame feature");
  }
  Eigen::Index text_dim = -1;
  for (std::size_t j = 0; j < subtitles.size(); ++j) {
    const auto& s = subtitles[j];
    if (s.start_frame < 0 || s.start_frame >= s.end_frame || s.end_frame > n) {
      throw InvariantError(where + ": subtitle " + std::to_string(j) + " spans [" +
                           std::to_string(s.start_frame) + ", " + std::to_string(s.end_frame) +
                           ") outside [0, " + std::to_string(n) + ")");
    }
    if (text_dim >= 0 && s.text_feature.size() != text_dim) {
      throw DimensionError(where + ": subtitle feature dimensions differ");
    }
    text_dim = s.text_feature.size();
    if (!s.text_feature.allFinite()) {
      throw InvariantError(where + ": non-finite subtitle feature");
    }
  }
  if (global_feature) {
    if (text_dim >= 0 && global_feature->size() != text_dim) {
      throw DimensionError(where + ": global feature dimension differs from subtitles");
    }
    if (!global_feature->allFinite()) {
      throw InvariantError(where + ": non-finite global feature");
    }
  }
  if (frame_labels) {
    if (static_cast<int>(frame_labels->size()) != n) {
      throw DimensionError(where + ": frame_labels length differs from frame count");
    }
    check_binary(*frame_labels, where + " frame_labels");
  }
  if (sentence_labels) {
    if (sentence_labels->size() != subtitles.size()) {
      throw DimensionError(where + ": sentence_labels length differs from subtitle count");
    }
    check_binary(*sentence_labels, where + " sentence_labels");
  }
  if (replay_scores) {
    if (static_cast<int>(replay_scores->size()) != n) {
      throw DimensionError(where + ": replay_scores length differs from frame count");
    }
    for (std::size_t i = 0; i < replay_scores->size(); ++i) {
      const double s = (*replay_scores)[i];
      if (!(s >= 0.0 && s <= 1.0)) {
        throw RangeError(where + ": replay_scores[" + std::to_string(i) + "] = " +
                         std::to_string(s) + " outside [0, 1]");
      }
    }
  }
  for (const auto& a : annotator_labels) {
    if (static_cast<int>(a.size()) != n) {
      throw DimensionError(where + ": annotator label length differs from frame count");
    }
    check_binary(a, where + " annotator_labels");
  }
  for (const auto& a : annotator_scores) {
    if (static_cast<int>(a.size()) != n) {
      throw DimensionError(where + ": annotator score length differs from frame count");
    }
  }
  if (shot_boundaries) {
    const auto& b = *shot_boundaries;
    if (b.empty() || b.front() != 0 || b.back() >= n ||
        std::adjacent_find(b.begin(), b.end(), std::greater_equal<>()) != b.end()) {
      throw InvariantError(where + ": shot boundaries must be strictly increasing from 0 and < N");
    }
  }
  if (require_supervision && !frame_labels && !replay_scores) {
    throw InvariantError(where + ": training sample needs frame_labels or replay_scores");
  }
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw SchemaError("unknown split '" + std::string(name) + "'");
}

const ManifestEntry& DatasetManifest::entry(std::string_view video_id) const {
  for (const auto& e : entries) {
    if (e.video_id == video_id) {
      return e;
    }
  }
  throw NotFoundError("unknown video id '" + std::string(video_id) + "'");
}

bool DatasetManifest::contains(std::string_view video_id) const {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const ManifestEntry& e) { return e.video_id == video_id; });
}

std::vector<std::string> DatasetManifest::ids(Split split) const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (e.split == split) {
      out.push_back(e.video_id);
    }
  }
  return out;
}

std::vector<std::string> DatasetManifest::all_ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    out.push_back(e.video_id);
  }
  return out;
}

fs::path DatasetManifest::resolve(const fs::path& p) const {
  return p.is_absolute() ? p : root / p;
}

DatasetManifest load_manifest(const fs::path& path) {
  const json doc = read_json_file(path);
  const std::string where = path.string();
  DatasetManifest m;
  try {
    if (doc.at("format").get<std::string>() != kManifestFormat) {
      throw SchemaError(where + ": unsupported manifest format '" +
                        doc.at("format").get<std::string>() + "'");
    }
    const fs::path root = doc.value("root", std::string("."));
    m.root = root.is_absolute() ? root : path.parent_path() / root;
    m.video_dim = doc.at("dims").at("video").get<int>();
    m.text_dim = doc.at("dims").at("text").get<int>();
  } catch (const json::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
  if (m.video_dim < 1 || m.text_dim < 1) {
    throw SchemaError(where + ": dims must be >= 1");
  }
  if (!doc.contains("entries") || !doc["entries"].is_array()) {
    throw SchemaError(where + ": missing 'entries' array");
  }
  std::unordered_set<std::string> seen;
  for (const auto& item : doc["entries"]) {
    ManifestEntry e;
    try {
      e.video_id = item.at("video_id").get<std::string>();
      e.frames = item.at("frames").get<std::string>();
      e.subtitles = item.at("subtitles").get<std::string>();
      e.labels = item.at("labels").get<std::string>();
      if (item.contains("global") && !item["global"].is_null()) {
        e.global_feature = fs::path(item["global"].get<std::string>());
      }
    } catch (const json::exception& ex) {
      throw SchemaError(where + ": malformed entry " + item.dump() + ": " + ex.what());
    }
    if (e.video_id.empty()) {
      throw SchemaError(where + ": entry with empty video_id");
    }
    if (!seen.insert(e.video_id).second) {
      throw DuplicateIdError(where + ": duplicate video_id '" + e.video_id + "'");
    }
    m.entries.push_back(std::move(e));
  }
  if (doc.contains("splits")) {
    if (!doc["splits"].is_object()) {
      throw SchemaError(where + ": 'splits' must be an object");
    }
    for (const auto& [name, ids] : doc["splits"].items()) {
      const Split split = parse_split(name);
      if (!ids.is_array()) {
        throw SchemaError(where + ": split '" + name + "' must be an array of ids");
      }
      for (const auto& id_json : ids) {
        const auto id = id_json.get<std::string>();
        auto it = std::find_if(m.entries.begin(), m.entries.end(),
                               [&](const ManifestEntry& e) { return e.video_id == id; });
        if (it == m.entries.end()) {
          throw SchemaError(where + ": split '" + name + "' names unknown video_id '" + id + "'");
        }
        if (it->split) {
          throw SchemaError(where + ": video_id '" + id + "' assigned to both '" +
                            std::string(to_string(*it->split)) + "' and '" + name + "'");
        }
        it->split = split;
      }
    }
  }
  for (const auto& e : m.entries) {
    const auto [fr, fc] = array_shape(m.resolve(e.frames));
    const auto [sr, sc] = array_shape(m.resolve(e.subtitles));
    if (fc != m.video_dim) {
      throw DimensionError(where + ": entry '" + e.video_id + "' frame features have " +
                           std::to_string(fc) + " columns, manifest says " +
                           std::to_string(m.video_dim));
    }
    if (sr > 0 && sc != m.text_dim) {
      throw DimensionError(where + ": entry '" + e.video_id + "' subtitle features have " +
                           std::to_string(sc) + " columns, manifest says " +
                           std::to_string(m.text_dim));
    }
    if (e.global_feature) {
      const auto [gr, gc] = array_shape(m.resolve(*e.global_feature));
      if (gr != 1 || gc != m.text_dim) {
        throw DimensionError(where + ": entry '" + e.video_id + "' global feature must be 1x" +
                             std::to_string(m.text_dim));
      }
    }
    if (!fs::exists(m.resolve(e.labels))) {
      throw FileError("referenced file does not exist: " + m.resolve(e.labels).string());
    }
    (void)fr;
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  json doc;
  doc["format"] = kManifestFormat;
  doc["root"] = ".";
  doc["dims"] = {{"video", manifest.video_dim}, {"text", manifest.text_dim}};
  json entries = json::array();
  json splits = {{"train", json::array()}, {"val", json::array()}, {"test", json::array()}};
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) {
    const fs::path full = manifest.resolve(p);
    return fs::relative(full, base.empty() ? fs::path(".") : base).generic_string();
  };
  for (const auto& e : manifest.entries) {
    json item = {{"video_id", e.video_id},
                 {"frames", rel(e.frames)},
                 {"subtitles", rel(e.subtitles)},
                 {"labels", rel(e.labels)}};
    if (e.global_feature) {
      item["global"] = rel(*e.global_feature);
    }
    entries.push_back(std::move(item));
    if (e.split) {
      splits[std::string(to_string(*e.split))].push_back(e.video_id);
    }
  }
  doc["entries"] = std::move(entries);
  doc["splits"] = std::move(splits);
  write_json_file(path, doc);
}

std::vector<int> replay_to_labels(std::span<const double> scores, double threshold) {
  std::vector<int> labels(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    if (!(s >= 0.0 && s <= 1.0)) {
      throw RangeError("replay score " + std::to_string(s) + " at index " + std::to_string(i) +
                       " outside [0, 1]");
    }
    labels[i] = s >= threshold ? 1 : 0;
  }
  return labels;
}

VideoSample load_sample(const DatasetManifest& manifest, std::string_view video_id) {
  const ManifestEntry& e = manifest.entry(video_id);
  const std::string where = "video '" + e.video_id + "'";
  VideoSample s;
  s.video_id = e.video_id;
  s.frame_features = read_array(manifest.resolve(e.frames));
  if (s.frame_features.cols() != manifest.video_dim) {
    throw DimensionError(where + ": frame feature dimension " +
                         std::to_string(s.frame_features.cols()) + " != manifest D_v " +
                         std::to_string(manifest.video_dim));
  }
  const Matrix text = read_array(manifest.resolve(e.subtitles));
  if (text.rows() > 0 && text.cols() != manifest.text_dim) {
    throw DimensionError(where + ": subtitle feature dimension " + std::to_string(text.cols()) +
                         " != manifest D_t " + std::to_string(manifest.text_dim));
  }
  if (e.global_feature) {
    const Matrix g = read_array(manifest.resolve(*e.global_feature));
    if (g.rows() != 1 || g.cols() != manifest.text_dim) {
      throw DimensionError(where + ": global feature must be 1x" +
                           std::to_string(manifest.text_dim));
    }
    s.global_feature = g.row(0);
  }
  const json doc = read_json_file(manifest.resolve(e.labels));
  const std::string jwhere = manifest.resolve(e.labels).string();
  if (doc.contains("num_frames") && doc["num_frames"].get<int>() != s.num_frames()) {
    throw DimensionError(where + ": num_frames " + std::to_string(doc["num_frames"].get<int>()) +
                         " differs from feature rows " + std::to_string(s.num_frames()));
  }
  const json subs = doc.value("subtitles", json::array());
  if (static_cast<Eigen::Index>(subs.size()) != text.rows()) {
    throw DimensionError(where + ": " + std::to_string(subs.size()) +
                         " subtitle entries but " + std::to_string(text.rows()) +
                         " subtitle feature rows");
  }
  for (std::size_t j = 0; j < subs.size(); ++j) {
    SubtitleSegment seg;
    try {
      seg.start_frame = subs[j].at("start").get<int>();
      seg.end_frame = subs[j].at("end").get<int>();
      seg.text = subs[j].value("text", std::string());
    } catch (const json::exception& ex) {
      throw SchemaError(jwhere + ": subtitle " + std::to_string(j) + ": " + ex.what());
    }
    seg.text_feature = text.row(static_cast<Eigen::Index>(j));
    s.subtitles.push_back(std::move(seg));
  }
  s.global_text = doc.value("global_text", std::string());
  if (doc.contains("frame_labels")) s.frame_labels = get_array<int>(doc, "frame_labels", jwhere);
  if (doc.contains("sentence_labels"))
    s.sentence_labels = get_array<int>(doc, "sentence_labels", jwhere);
  if (doc.contains("replay_scores"))
    s.replay_scores = get_array<double>(doc, "replay_scores", jwhere);
  if (doc.contains("annotator_labels"))
    s.annotator_labels = doc["annotator_labels"].get<std::vector<std::vector<int>>>();
  if (doc.contains("annotator_scores"))
    s.annotator_scores = doc["annotator_scores"].get<std::vector<std::vector<double>>>();
  if (doc.contains("shots")) s.shot_boundaries = get_array<int>(doc, "shots", jwhere);
  s.validate();
  return s;
}

ManifestEntry write_sample(const VideoSample& sample, const fs::path& dir) {
  sample.validate();
  fs::create_directories(dir);
  ManifestEntry e;
  e.video_id = sample.video_id;
  e.frames = sample.video_id + ".frames.hsum";
  e.subtitles = sample.video_id + ".subs.hsum";
  e.labels = sample.video_id + ".json";
  write_array(dir / e.frames, sample.frame_features);
  const Eigen::Index text_dim =
      sample.subtitles.empty()
          ? (sample.global_feature ? sample.global_feature->size() : 0)
          : sample.subtitles.front().text_feature.size();
  Matrix text(static_cast<Eigen::Index>(sample.subtitles.size()), text_dim);
  json subs = json::array();
  for (std::size_t j = 0; j < sample.subtitles.size(); ++j) {
    const auto& seg = sample.subtitles[j];
    text.row(static_cast<Eigen::Index>(j)) = seg.text_feature;
    json item = {{"start", seg.start_frame}, {"end", seg.end_frame}};
    if (!seg.text.empty()) {
      item["text"] = seg.text;
    }
    subs.push_back(std::move(item));
  }
  write_array(dir / e.subtitles, text);
  if (sample.global_feature) {
    e.global_feature = fs::path(sample.video_id + ".global.hsum");
    write_array(dir / *e.global_feature, Matrix(*sample.global_feature));
  }
  json doc = {{"video_id", sample.video_id},
              {"num_frames", sample.num_frames()},
              {"fps", 1.0},
              {"subtitles", std::move(subs)}};
  if (!sample.global_text.empty()) doc["global_text"] = sample.global_text;
  if (sample.frame_labels) doc["frame_labels"] = *sample.frame_labels;
  if (sample.sentence_labels) doc["sentence_labels"] = *sample.sentence_labels;
  if (sample.replay_scores) doc["replay_scores"] = *sample.replay_scores;
  if (!sample.annotator_labels.empty()) doc["annotator_labels"] = sample.annotator_labels;
  if (!sample.annotator_scores.empty()) doc["annotator_scores"] = sample.annotator_scores;
  if (sample.shot_boundaries) doc["shots"] = *sample.shot_boundaries;
  write_json_file(dir / e.labels, doc);
  return e;
}

namespace {

const std::vector<std::string>& synth_vocabulary() {
  static const std::vector<std::string> words = {
      "cut",    "pour",  "stir",   "fold",  "heat",   "place",  "turn",  "press", "mix",
      "add",    "wait",  "remove", "slice", "shape",  "tie",    "wrap",  "clean", "dry",
      "onion",  "paper", "card",   "brush", "pan",    "salmon", "dough", "glue",  "string",
      "corner", "edge",  "oven",   "water", "butter", "bowl",   "lid",   "skin",  "side",
      "gently", "slowly", "firmly", "then"};
  return words;
}

std::string step_phrase(Rng& rng) {
  const auto& vocab = synth_vocabulary();
  const int len = 3 + static_cast<int>(uniform_index(rng, 3));
  std::string out;
  for (int w = 0; w < len; ++w) {
    if (w) out += ' ';
    out += vocab[uniform_index(rng, vocab.size())];
  }
  return out;
}

RowVector gaussian_row(Rng& rng, Eigen::Index dim, double stddev) {
  RowVector v(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    v(k) = standard_normal(rng) * stddev;
  }
  return v;
}

// Rounds through float32 so the in-memory sample equals what is written.
template <class M>
M as_float32(M m) {
  return m.unaryExpr([](double x) { return static_cast<double>(static_cast<float>(x)); });
}

}  // namespace

DatasetManifest synth_generate(const SynthOptions& o, const fs::path& out_dir) {
  if (o.n_videos < 1 || o.steps_per_video < 1 || o.frames_per_step < 1 || o.video_dim < 1 ||
      o.text_dim < 1) {
    throw ConfigError("synth: counts and dimensions must be >= 1");
  }
  const int important =
      o.important_steps >= 0 ? o.important_steps : std::max(1, o.steps_per_video / 2);
  if (important > o.steps_per_video) {
    throw ConfigError("synth: important_steps exceeds steps_per_video");
  }
  if (o.val_fraction < 0 || o.test_fraction < 0 || o.val_fraction + o.test_fraction >= 1.0) {
    throw ConfigError("synth: split fractions must be >= 0 and sum below 1");
  }
  const bool task_mode = o.task_count > 0;
  if (task_mode) {
    if (o.step_pool < 1 || o.relevant_per_task < important ||
        o.relevant_per_task > o.step_pool ||
        o.step_pool - o.relevant_per_task < o.steps_per_video - important) {
      throw ConfigError("synth: task mode needs step_pool >= relevant_per_task >= important_steps");
    }
  } else if (o.step_pool > 0 && o.step_pool < o.steps_per_video) {
    throw ConfigError("synth: step_pool smaller than steps_per_video");
  }
  const int n_frames = o.steps_per_video * o.frames_per_step;
  if (n_frames > kMaxArrayExtent) {
    throw ConfigError("synth: too many frames per video");
  }

  Rng rng(o.seed);
  const double latent_std = o.latent_scale / std::sqrt(static_cast<double>(o.video_dim));
  const double frame_std = o.frame_noise / std::sqrt(static_cast<double>(o.video_dim));
  const double text_std = o.text_noise / std::sqrt(static_cast<double>(o.text_dim));
  Matrix text_map(o.text_dim, o.video_dim);
  for (Eigen::Index i = 0; i < text_map.size(); ++i) {
    text_map.data()[i] = standard_normal(rng) / std::sqrt(static_cast<double>(o.video_dim));
  }

  struct StepType {
    RowVector latent;
    std::string phrase;
  };
  std::vector<StepType> pool;
  for (int k = 0; k < o.step_pool; ++k) {
    pool.push_back({gaussian_row(rng, o.video_dim, latent_std), step_phrase(rng)});
  }
  std::vector<std::vector<int>> task_relevant;
  for (int t = 0; t < o.task_count; ++t) {
    std::vector<int> types(static_cast<std::size_t>(o.step_pool));
    for (int k = 0; k < o.step_pool; ++k) types[static_cast<std::size_t>(k)] = k;
    shuffle(types, rng);
    types.resize(static_cast<std::size_t>(o.relevant_per_task));
    std::sort(types.begin(), types.end());
    task_relevant.push_back(std::move(types));
  }

  fs::create_directories(out_dir);
  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.video_dim = o.video_dim;
  manifest.text_dim = o.text_dim;

  const int n_test = static_cast<int>(std::lround(o.test_fraction * o.n_videos));
  const int n_val = static_cast<int>(std::lround(o.val_fraction * o.n_videos));
  const int n_train = o.n_videos - n_val - n_test;
  if (n_train < 1) {
    throw ConfigError("synth: split fractions leave no training videos");
  }

  const int id_width = o.n_videos > 999 ? static_cast<int>(std::to_string(o.n_videos - 1).size()) : 3;
  for (int v = 0; v < o.n_videos; ++v) {
    std::string id = std::to_string(v);
    id = "v" + std::string(static_cast<std::size_t>(std::max(0, id_width - static_cast<int>(id.size()))), '0') + id;

    // Pick step types and which of them are important.
    std::vector<StepType> steps;
    std::vector<int> is_important(static_cast<std::size_t>(o.steps_per_video), 0);
    if (task_mode) {
      const auto& rel = task_relevant[uniform_index(rng, task_relevant.size())];
      std::vector<int> relevant(rel.begin(), rel.end());
      std::vector<int> filler;
      for (int k = 0; k < o.step_pool; ++k) {
        if (!std::binary_search(rel.begin(), rel.end(), k)) filler.push_back(k);
      }
      shuffle(relevant, rng);
      shuffle(filler, rng);
      std::vector<std::pair<int, int>> chosen;  // (type, important)
      for (int k = 0; k < important; ++k) chosen.emplace_back(relevant[static_cast<std::size_t>(k)], 1);
      for (int k = 0; k < o.steps_per_video - important; ++k)
        chosen.emplace_back(filler[static_cast<std::size_t>(k)], 0);
      shuffle(chosen, rng);
      for (std::size_t s = 0; s < chosen.size(); ++s) {
        steps.push_back(pool[static_cast<std::size_t>(chosen[s].first)]);
        is_important[s] = chosen[s].second;
      }
    } else {
      if (o.step_pool > 0) {
        std::vector<int> types(static_cast<std::size_t>(o.step_pool));
        for (int k = 0; k < o.step_pool; ++k) types[static_cast<std::size_t>(k)] = k;
        shuffle(types, rng);
        for (int s = 0; s < o.steps_per_video; ++s)
          steps.push_back(pool[static_cast<std::size_t>(types[static_cast<std::size_t>(s)])]);
      } else {
        for (int s = 0; s < o.steps_per_video; ++s)
          steps.push_back({gaussian_row(rng, o.video_dim, latent_std), step_phrase(rng)});
      }
      std::vector<int> order(static_cast<std::size_t>(o.steps_per_video));
      for (int s = 0; s < o.steps_per_video; ++s) order[static_cast<std::size_t>(s)] = s;
      shuffle(order, rng);
      for (int k = 0; k < important; ++k) is_important[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = 1;
    }

    VideoSample sample;
    sample.video_id = id;
    sample.frame_features.resize(n_frames, o.video_dim);
    std::vector<int> frame_labels(static_cast<std::size_t>(n_frames));
    std::vector<double> replay(static_cast<std::size_t>(n_frames));
    std::vector<int> sentence_labels;
    RowVector important_mean = RowVector::Zero(o.video_dim);
    std::string global_text;
    for (int s = 0; s < o.steps_per_video; ++s) {
      const bool imp = is_important[static_cast<std::size_t>(s)] != 0;
      const double lo = imp ? 0.5 : 0.0;
      const double hi = imp ? 1.0 : 0.1;
      const double level = uniform(rng, lo, hi);
      for (int f = 0; f < o.frames_per_step; ++f) {
        const int i = s * o.frames_per_step + f;
        sample.frame_features.row(i) = steps[static_cast<std::size_t>(s)].latent +
                                       gaussian_row(rng, o.video_dim, frame_std);
        double score = level;
        if (o.score_jitter > 0) {
          score = std::clamp(level + uniform(rng, -o.score_jitter, o.score_jitter), lo, hi);
        }
        replay[static_cast<std::size_t>(i)] = static_cast<double>(static_cast<float>(score));
        frame_labels[static_cast<std::size_t>(i)] = imp ? 1 : 0;
      }
      SubtitleSegment seg;
      seg.start_frame = s * o.frames_per_step;
      seg.end_frame = (s + 1) * o.frames_per_step;
      seg.text_feature = as_float32(RowVector(
          steps[static_cast<std::size_t>(s)].latent * text_map.transpose() +
          gaussian_row(rng, o.text_dim, text_std)));
      seg.text = steps[static_cast<std::size_t>(s)].phrase;
      sample.subtitles.push_back(std::move(seg));
      sentence_labels.push_back(imp ? 1 : 0);
      if (imp) {
        important_mean += steps[static_cast<std::size_t>(s)].latent;
        if (!global_text.empty()) global_text += ' ';
        global_text += steps[static_cast<std::size_t>(s)].phrase;
      }
    }
    sample.frame_features = as_float32(sample.frame_features);
    if (important > 0) {
      important_mean /= static_cast<double>(important);
      sample.global_feature = as_float32(RowVector(important_mean * text_map.transpose()));
      sample.global_text = global_text;
    }
    sample.frame_labels = std::move(frame_labels);
    sample.sentence_labels = std::move(sentence_labels);
    sample.replay_scores = std::move(replay);

    ManifestEntry entry = write_sample(sample, out_dir);
    if (v < n_train) {
      entry.split = Split::train;
    } else if (v < n_train + n_val) {
      entry.split = Split::val;
    } else {
      entry.split = Split::test;
    }
    manifest.entries.push_back(std::move(entry));
  }
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace hsum
