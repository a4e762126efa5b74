#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "fas/error.hpp"
#include "fas/io.hpp"
#include "fas/pipeline.hpp"

namespace fas::pipeline {

LabelPaths label_paths(const fs::path& dir, const std::string& id) {
  return {dir / (id + ".fga1"), dir / (id + ".attack.png"), dir / (id + ".living.png")};
}

std::size_t annotate_manifest(const fs::path& manifest_path,
                              const annotator::LabelingPolicy& policy,
                              segmenter::SegmenterBackend& backend, const fs::path& out_dir,
                              int workers) {
  policy.validate();
  auto samples = ingest(manifest_path);
  fs::create_directories(out_dir);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= samples.size()) return;
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      try {
        Sample& s = samples[i];
        if (!s.depth && policy.annotation_kind == annotator::AnnotationKind::depth_valued)
          attach_pseudo_depth(s);
        const auto ann = annotator::annotate_sample(s, policy, backend);
        const auto paths = label_paths(out_dir, s.id);
        annotator::write_map(ann.map, paths.map);
        io::write_mask_png(ann.attack.bitmap, paths.attack);
        io::write_mask_png(ann.living.bitmap, paths.living);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const int n = std::max(1, std::min<int>(workers, static_cast<int>(samples.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  spdlog::info("annotated {} samples into {}", samples.size(), out_dir.string());
  return samples.size();
}

mcrea::BatchItem load_item(const Sample& sample, const fs::path& labels_dir) {
  const auto paths = label_paths(labels_dir, sample.id);
  if (!fs::exists(paths.map))
    throw ValidationError("no cached label for '" + sample.id + "' in " + labels_dir.string());
  auto map = annotator::read_map(paths.map);
  if (map.height() != sample.image.height || map.width() != sample.image.width)
    throw ValidationError("cached label for '" + sample.id + "' differs in size from the image");
  if (fs::exists(paths.attack) && fs::exists(paths.living))
    return mcrea::BatchItem::from_annotation(sample.image, std::move(map), sample.landmarks,
                                             io::read_mask_png(paths.attack),
                                             io::read_mask_png(paths.living));
  return mcrea::BatchItem::from_map(sample.image, std::move(map), sample.landmarks);
}

}  // namespace fas::pipeline
