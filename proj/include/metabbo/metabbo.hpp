#pragma once

#include "metabbo/autoencoder.hpp"
#include "metabbo/bounds.hpp"
#include "metabbo/glis.hpp"
#include "metabbo/io.hpp"
#include "metabbo/metadataset.hpp"
#include "metabbo/parallel.hpp"
#include "metabbo/problems.hpp"
#include "metabbo/report.hpp"
#include "metabbo/rng.hpp"
#include "metabbo/sampling.hpp"
#include "metabbo/solvers.hpp"
#include "metabbo/surrogate.hpp"
