#pragma once

#include "fibra/awc.hpp"
#include "fibra/cluster_map.hpp"
#include "fibra/direction_field.hpp"
#include "fibra/entropy.hpp"
#include "fibra/evaluate.hpp"
#include "fibra/features.hpp"
#include "fibra/geometry.hpp"
#include "fibra/io.hpp"
#include "fibra/pipeline.hpp"
#include "fibra/rsa.hpp"
#include "fibra/sem.hpp"
#include "fibra/volume.hpp"
#include "fibra/vtk.hpp"
