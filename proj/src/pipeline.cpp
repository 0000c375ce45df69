#include "urbanfuture/pipeline.hpp"

#include <cstdio>
#include <future>
#include <sstream>

#include "urbanfuture/error.hpp"

namespace urbanfuture {

std::string_view to_string(RenderMode m) { return m == RenderMode::Normals ? "normals" : "appearance"; }

RenderMode parse_render_mode(std::string_view s) {
  if (s == "normals") return RenderMode::Normals;
  if (s == "appearance") return RenderMode::Appearance;
  throw Error(ErrorKind::InvalidArgument, "unknown render mode '" + std::string(s) + "'");
}

Pose scene_extrinsics(const SceneBundle& bundle) {
  return decompose_homography(bundle.intrinsics, bundle.homography);
}

BackgroundModel scene_background(const SceneBundle& bundle, const std::vector<ImageU8>& frames, double dilation) {
  std::vector<std::vector<Box>> boxes(frames.size());
  for (const auto& t : bundle.tracks) {
    for (const auto& e : t.entries) {
      if (e.frame < int(frames.size())) boxes[std::size_t(e.frame)].push_back(e.box);
    }
  }
  std::vector<ImageU8> masks;
  masks.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    masks.push_back(mask_from_boxes(frames[i].width, frames[i].height, boxes[i], dilation));
  }
  return build_background(frames, masks);
}

VehicleSolve solve_vehicle(const SceneBundle& bundle, const Pose& extrinsics, int frame, int vehicle_id,
                           const SolverOptions& opts) {
  const auto ctx = "vehicle " + std::to_string(vehicle_id) + " frame " + std::to_string(frame) + ": ";
  const VehicleTrack* track = bundle.track(vehicle_id);
  if (!track) throw Error(ErrorKind::NotFound, ctx + "no such vehicle");
  const TrackEntry* entry = track->at_frame(frame);
  if (!entry) throw Error(ErrorKind::CrossReference, ctx + "no track entry");
  const KeypointObservation* kps = bundle.keypoints_for(frame, vehicle_id);
  if (!kps) throw Error(ErrorKind::MissingKeypoint, ctx + "no keypoints");
  const CadModel* cad = bundle.cad_for(vehicle_id);
  if (!cad) throw Error(ErrorKind::CrossReference, ctx + "no cad assignment");
  try {
    const auto prior = ground_prior_from_box(bundle.homography, extrinsics, entry->box, cad->ground_offset());
    return {vehicle_id, frame,
            solve_pnp(match_keypoints(kps->keypoints, *cad), bundle.intrinsics, std::nullopt, opts, prior)};
  } catch (const Error& e) {
    throw Error(e.kind(), ctx + e.what());
  }
}

SolveOutcome solve_vehicles(const SceneBundle& bundle, const Pose& extrinsics, int frame,
                            const std::vector<int>& vehicle_ids, const SolverOptions& opts) {
  std::vector<std::future<VehicleSolve>> jobs;
  jobs.reserve(vehicle_ids.size());
  for (int id : vehicle_ids) {
    jobs.push_back(std::async(std::launch::async, [&, id] { return solve_vehicle(bundle, extrinsics, frame, id, opts); }));
  }
  SolveOutcome out;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    try {
      out.solved.push_back(jobs[i].get());
    } catch (const Error& e) {
      out.warnings.push_back("skipping " + std::string(e.what()) + " [" + std::string(to_string(e.kind())) + "]");
    }
  }
  return out;
}

std::vector<int> eligible_vehicles(const SceneBundle& bundle, int frame) {
  std::vector<int> ids;
  for (const auto& t : bundle.tracks) {
    if (t.at_frame(frame) && bundle.keypoints_for(frame, t.vehicle_id) && bundle.cad_for(t.vehicle_id)) {
      ids.push_back(t.vehicle_id);
    }
  }
  return ids;
}

GeneratedClip generate_clip(const SceneBundle& bundle, const Pose& extrinsics, const BackgroundModel& background,
                            const ImageU8& reference_image, const std::vector<VehicleSolve>& solves,
                            const std::optional<PolylineOverride>& polyline, const GenerateOptions& opts) {
  const int steps = step_count(opts.horizon, opts.timestep);
  GeneratedClip clip;
  clip.renders.resize(std::size_t(steps));
  for (const auto& s : solves) {
    const CadModel& cad = *bundle.cad_for(s.vehicle_id);
    try {
      PlanOptions po;
      po.horizon = opts.horizon;
      po.timestep = opts.timestep;
      po.smooth_heading = opts.smooth_heading;
      po.align_first_heading = opts.align_first_heading;
      po.vehicle_id = s.vehicle_id;
      Trajectory traj;
      if (polyline && polyline->vehicle_id == s.vehicle_id) {
        traj = resample_user_polyline(polyline->points, bundle.homography, opts.horizon, opts.timestep);
      } else {
        traj = lift_track(*bundle.track(s.vehicle_id), bundle.homography, bundle.config.fps);
        po.start_time = opts.reference_frame / bundle.config.fps;
      }
      FuturePlan plan = plan_future(s.report.pose, traj, extrinsics, po);

      std::optional<BakedAppearance> baked;
      if (opts.mode == RenderMode::Appearance) {
        const Rect src = projected_viewport(cad, s.report.pose, bundle.intrinsics, 0);
        baked = bake_appearance(cad, crop(reference_image, src), src, s.report.pose, bundle.intrinsics);
      }
      std::vector<RenderedCrop> renders;
      for (const auto& target : plan.targets) {
        const Rect vp = projected_viewport(cad, target.pose, bundle.intrinsics);
        RenderedCrop r = baked ? render_appearance(cad, *baked, target.pose, bundle.intrinsics, vp)
                               : render_normal_sketch(cad, target.pose, bundle.intrinsics, vp);
        r.vehicle_id = s.vehicle_id;
        renders.push_back(std::move(r));
      }
      for (std::size_t k = 0; k < renders.size(); ++k) clip.renders[k].push_back(std::move(renders[k]));
      clip.plans.push_back(std::move(plan));
    } catch (const Error& e) {
      clip.warnings.push_back("skipping vehicle " + std::to_string(s.vehicle_id) + ": " + e.what() + " [" +
                              std::string(to_string(e.kind())) + "]");
    }
  }
  for (const auto& renders : clip.renders) {
    clip.frames.push_back(composite(background, renders, {opts.per_pixel_depth_test}).image);
  }
  return clip;
}

std::string options_digest(const SceneBundle& bundle, const std::vector<int>& vehicles,
                           const std::optional<PolylineOverride>& polyline, const GenerateOptions& opts,
                           const SolverOptions& solver) {
  std::ostringstream os;
  os.precision(17);
  os << "clip=" << bundle.clip_id << ";frame=" << opts.reference_frame << ";horizon=" << opts.horizon
     << ";timestep=" << opts.timestep << ";mode=" << to_string(opts.mode) << ";align=" << opts.align_first_heading
     << ";smooth=" << opts.smooth_heading << ";zt=" << opts.per_pixel_depth_test << ";yaw_only=" << solver.yaw_only
     << ";vehicles=";
  for (int v : vehicles) os << v << ',';
  if (polyline) {
    os << ";polyline=" << polyline->vehicle_id << ':';
    for (const auto& p : polyline->points) os << p.x() << ' ' << p.y() << ',';
  }
  return os.str();
}

OutputManifest clip_manifest(const SceneBundle& bundle, const std::string& clip_id, const GeneratedClip& clip,
                             const GenerateOptions& opts, const std::string& options_hash) {
  OutputManifest m;
  m.clip_id = clip_id;
  m.reference_frame = opts.reference_frame;
  m.timestep = opts.timestep;
  m.horizon = opts.horizon;
  m.mode = std::string(to_string(opts.mode));
  for (const auto& p : clip.plans) m.plans.push_back({p.vehicle_id, p.source_pose, p.targets});
  m.warnings = clip.warnings;
  m.tool_version = std::string(tool_version());
  m.options_hash = options_hash;
  m.approximate_intrinsics = bundle.approximate_intrinsics;
  return m;
}

}  // namespace urbanfuture
