#pragma once

// Umbrella header.
#include "vftrack/types.hpp"
#include "vftrack/csv.hpp"
#include "vftrack/image.hpp"
#include "vftrack/detect.hpp"
#include "vftrack/match.hpp"
#include "vftrack/kinematics.hpp"
#include "vftrack/tracker.hpp"
#include "vftrack/pillar.hpp"
#include "vftrack/assignment.hpp"
#include "vftrack/eval.hpp"
#include "vftrack/synth.hpp"
