# Region Geometry App
