#include "hsum/alignment.hpp"

#include <numeric>
#include <string>

#include "hsum/error.hpp"

namespace hsum {

Modality TokenLayout::modality(int token) const {
  if (token == cls_video()) return Modality::cls_video;
  if (token <= n_frames) return Modality::frame;
  if (token == cls_text()) return Modality::cls_text;
  return Modality::text;
}

AlignmentMask::AlignmentMask(TokenLayout layout, std::vector<unsigned char> bits)
    : layout_(layout), bits_(std::move(bits)) {
  if (bits_.size() != static_cast<std::size_t>(size()) * static_cast<std::size_t>(size())) {
    throw DimensionError("AlignmentMask: bit count does not match token count");
  }
}

Matrix AlignmentMask::additive() const {
  const int t = size();
  Matrix m(t, t);
  for (int q = 0; q < t; ++q) {
    for (int k = 0; k < t; ++k) {
      m(q, k) = allowed(q, k) ? 0.0 : kMaskedLogit;
    }
  }
  return m;
}

AlignmentMask build_alignment_mask(int n_frames, int n_subtitles,
                                   std::span<const SubtitleSegment> subtitles,
                                   MaskOptions options) {
  if (n_frames < 1) {
    throw InvariantError("alignment mask needs at least one frame");
  }
  if (n_subtitles < 0 || static_cast<std::size_t>(n_subtitles) != subtitles.size()) {
    throw DimensionError("alignment mask: M = " + std::to_string(n_subtitles) + " but " +
                         std::to_string(subtitles.size()) + " segments given");
  }
  for (std::size_t j = 0; j < subtitles.size(); ++j) {
    const auto& s = subtitles[j];
    if (s.start_frame < 0 || s.start_frame >= s.end_frame || s.end_frame > n_frames) {
      throw InvariantError("alignment mask: segment " + std::to_string(j) + " [" +
                           std::to_string(s.start_frame) + ", " + std::to_string(s.end_frame) +
                           ") invalid for N = " + std::to_string(n_frames));
    }
  }
  const TokenLayout layout{n_frames, n_subtitles};
  const int t = layout.size();
  std::vector<unsigned char> bits(static_cast<std::size_t>(t) * static_cast<std::size_t>(t), 0);
  auto set = [&](int q, int k) {
    bits[static_cast<std::size_t>(q) * static_cast<std::size_t>(t) + static_cast<std::size_t>(k)] =
        1;
  };
  for (int q = 0; q < t; ++q) {
    const Modality mq = layout.modality(q);
    for (int k = 0; k < t; ++k) {
      const Modality mk = layout.modality(k);
      const bool cls = mq == Modality::cls_video || mq == Modality::cls_text ||
                       mk == Modality::cls_video || mk == Modality::cls_text;
      if (q == k || cls) {
        set(q, k);
      } else if (mq == mk) {
        if (options.intra_modal) set(q, k);
      } else {
        const int frame = mq == Modality::frame ? q - 1 : k - 1;
        const int sub = mq == Modality::text ? q - n_frames - 2 : k - n_frames - 2;
        const auto& s = subtitles[static_cast<std::size_t>(sub)];
        if (s.start_frame <= frame && frame < s.end_frame) set(q, k);
      }
    }
  }
  return AlignmentMask(layout, std::move(bits));
}

std::vector<SubtitleSegment> text_segments(const VideoSample& sample, Mode mode) {
  if (mode == Mode::child) {
    return sample.subtitles;
  }
  if (!sample.global_feature) {
    throw InvariantError("video '" + sample.video_id +
                         "': parent mode requires a global description feature");
  }
  SubtitleSegment whole;
  whole.text_feature = *sample.global_feature;
  whole.start_frame = 0;
  whole.end_frame = sample.num_frames();
  whole.text = sample.global_text;
  return {whole};
}

FusedSequence build_fused_sequence(const VideoSample& sample, const EmbeddingParams& p, Mode mode,
                                   MaskOptions mask_options) {
  const int n = sample.num_frames();
  if (mode == Mode::child && sample.num_subtitles() == 0) {
    throw InvariantError("video '" + sample.video_id + "': child mode requires M >= 1 subtitles");
  }
  std::vector<SubtitleSegment> segs = text_segments(sample, mode);
  const int m = static_cast<int>(segs.size());
  if (n + 1 > p.pos_video.rows() || n > p.seg_start.rows()) {
    throw DimensionError("video '" + sample.video_id + "': " + std::to_string(n) +
                         " frames exceed the position table (max " +
                         std::to_string(p.pos_video.rows() - 1) + ")");
  }
  if (m + 1 > p.pos_text.rows()) {
    throw DimensionError("video '" + sample.video_id + "': " + std::to_string(m) +
                         " text tokens exceed the position table (max " +
                         std::to_string(p.pos_text.rows() - 1) + ")");
  }
  if (sample.frame_features.cols() != p.video_proj_weight.rows()) {
    throw DimensionError("video '" + sample.video_id + "': frame feature dimension " +
                         std::to_string(sample.frame_features.cols()) + " != model D_v " +
                         std::to_string(p.video_proj_weight.rows()));
  }

  FusedSequence seq;
  seq.mask = build_alignment_mask(n, m, segs, mask_options);
  seq.layout = seq.mask.layout();

  std::vector<int> frame_pos(static_cast<std::size_t>(n));
  std::iota(frame_pos.begin(), frame_pos.end(), 1);
  ad::Var frames = ad::add(ad::linear(ad::constant(sample.frame_features), p.video_proj_weight,
                                      p.video_proj_bias),
                           ad::gather_rows(p.pos_video, frame_pos));

  Matrix text_raw(m, p.text_proj_weight.rows());
  std::vector<int> text_pos(static_cast<std::size_t>(m));
  std::vector<int> starts(static_cast<std::size_t>(m));
  std::vector<int> ends(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const auto& s = segs[static_cast<std::size_t>(j)];
    if (s.text_feature.size() != p.text_proj_weight.rows()) {
      throw DimensionError("video '" + sample.video_id + "': text feature dimension " +
                           std::to_string(s.text_feature.size()) + " != model D_t " +
                           std::to_string(p.text_proj_weight.rows()));
    }
    text_raw.row(j) = s.text_feature;
    text_pos[static_cast<std::size_t>(j)] = j + 1;
    starts[static_cast<std::size_t>(j)] = s.start_frame;
    ends[static_cast<std::size_t>(j)] = s.end_frame - 1;
  }
  ad::Var text = ad::linear(ad::constant(std::move(text_raw)), p.text_proj_weight,
                            p.text_proj_bias);
  text = ad::add(text, ad::gather_rows(p.pos_text, text_pos));
  text = ad::add(text, ad::add(ad::gather_rows(p.seg_start, starts),
                               ad::gather_rows(p.seg_end, ends)));

  const int zero = 0;
  ad::Var cls_v = ad::add(p.cls_video, ad::gather_rows(p.pos_video, std::span(&zero, 1)));
  ad::Var cls_t = ad::add(p.cls_text, ad::gather_rows(p.pos_text, std::span(&zero, 1)));
  const ad::Var parts[] = {cls_v, frames, cls_t, text};
  seq.tokens = ad::concat_rows(parts);

  seq.modality.resize(static_cast<std::size_t>(seq.layout.size()));
  seq.segment.assign(static_cast<std::size_t>(seq.layout.size()), -1);
  for (int t = 0; t < seq.layout.size(); ++t) {
    seq.modality[static_cast<std::size_t>(t)] = seq.layout.modality(t);
  }
  for (int j = m - 1; j >= 0; --j) {
    const auto& s = segs[static_cast<std::size_t>(j)];
    seq.segment[static_cast<std::size_t>(seq.layout.text(j))] = j;
    for (int i = s.start_frame; i < s.end_frame; ++i) {
      seq.segment[static_cast<std::size_t>(seq.layout.frame(i))] = j;
    }
  }
  seq.segments = std::move(segs);
  return seq;
}

}  // namespace hsum
