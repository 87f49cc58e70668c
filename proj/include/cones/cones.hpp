#pragma once

#include "cones/error.hpp"
#include "cones/mesh.hpp"
#include "cones/geometry.hpp"
#include "cones/sparse.hpp"
#include "cones/yamabe.hpp"
#include "cones/miqp.hpp"
#include "cones/state.hpp"
#include "cones/angles.hpp"
#include "cones/relocation.hpp"
#include "cones/cone_count.hpp"
#include "cones/homology.hpp"
#include "cones/high_genus.hpp"
#include "cones/pipeline.hpp"
#include "cones/report.hpp"
