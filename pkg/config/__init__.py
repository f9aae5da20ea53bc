# FineHash project configuration
